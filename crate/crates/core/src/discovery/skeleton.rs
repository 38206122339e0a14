//! PC-stable skeleton search: depth-by-depth edge removal with Fisher-z
//! tests, conditioning sets drawn from the frozen neighborhoods of each
//! depth, removals applied as a batch at the end of the depth. Enumeration
//! is fixed (ascending column index, lexicographic subsets) so the result is
//! reproducible and independent of any parallel scheduling.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scalar::Real;
use crate::tabular::{ColumnRole, Dataset};

use super::ci::CorrelationMatrix;

/// Role-derived edge-direction constraints: parameters (tier 0) feed
/// intermediates (tier 1) feed outcomes (tier 2). Edges from a higher tier
/// to a strictly lower one are forbidden, and outcomes never have outgoing
/// edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackgroundKnowledge {
    tiers: Vec<u8>,
}

impl BackgroundKnowledge {
    pub fn from_roles(roles: &[ColumnRole]) -> Self {
        let tiers = roles
            .iter()
            .map(|r| match r {
                ColumnRole::Parameter => 0,
                ColumnRole::Intermediate => 1,
                ColumnRole::Outcome | ColumnRole::Ignore => 2,
            })
            .collect();
        BackgroundKnowledge { tiers }
    }

    pub fn tier(&self, v: usize) -> u8 {
        self.tiers[v]
    }

    pub fn len(&self) -> usize {
        self.tiers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiers.is_empty()
    }

    /// May a directed edge `from -> to` exist?
    pub fn edge_allowed(&self, from: usize, to: usize) -> bool {
        self.tiers[from] <= self.tiers[to] && self.tiers[from] != 2
    }

    /// Pairs forbidden in both directions can never be skeleton edges.
    pub fn pair_forbidden(&self, a: usize, b: usize) -> bool {
        !self.edge_allowed(a, b) && !self.edge_allowed(b, a)
    }

    /// Is the direction of an adjacent pair forced by the tiers?
    pub fn forced_direction(&self, a: usize, b: usize) -> Option<(usize, usize)> {
        if self.tiers[a] < self.tiers[b] {
            Some((a, b))
        } else if self.tiers[b] < self.tiers[a] {
            Some((b, a))
        } else {
            None
        }
    }
}

/// Undirected result of the constraint stage plus the separating sets found
/// when edges were removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    k: usize,
    adjacency: Vec<Vec<bool>>,
    /// Keyed by (min, max) node index.
    pub sepsets: std::collections::BTreeMap<(usize, usize), Vec<usize>>,
}

impl Skeleton {
    /// Builds a skeleton from an explicit undirected edge list.
    pub fn from_edges(k: usize, edges: &[(usize, usize)]) -> Self {
        let mut adjacency = vec![vec![false; k]; k];
        for &(a, b) in edges {
            adjacency[a][b] = true;
            adjacency[b][a] = true;
        }
        Skeleton {
            k,
            adjacency,
            sepsets: Default::default(),
        }
    }

    pub fn set_sepset(&mut self, a: usize, b: usize, sepset: Vec<usize>) {
        self.sepsets.insert((a.min(b), a.max(b)), sepset);
    }

    fn complete(k: usize, bk: &BackgroundKnowledge) -> Self {
        let mut adjacency = vec![vec![false; k]; k];
        for a in 0..k {
            for b in a + 1..k {
                if !bk.pair_forbidden(a, b) {
                    adjacency[a][b] = true;
                    adjacency[b][a] = true;
                }
            }
        }
        Skeleton {
            k,
            adjacency,
            sepsets: Default::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency[a][b]
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        (0..self.k).filter(|&w| self.adjacency[v][w]).collect()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.k {
            for b in a + 1..self.k {
                if self.adjacency[a][b] {
                    out.push((a, b));
                }
            }
        }
        out
    }

    pub fn sepset(&self, a: usize, b: usize) -> Option<&Vec<usize>> {
        self.sepsets.get(&(a.min(b), a.max(b)))
    }

    fn remove(&mut self, a: usize, b: usize, sepset: Vec<usize>) {
        self.adjacency[a][b] = false;
        self.adjacency[b][a] = false;
        self.sepsets.insert((a.min(b), a.max(b)), sepset);
    }
}

/// Record of one removed edge, for the discovery report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RemovedEdge<F: Real> {
    pub i: usize,
    pub j: usize,
    pub sepset: Vec<usize>,
    pub p_value: F,
}

/// Lexicographic size-`d` subsets of `items` (ascending index order). The
/// callback returns `true` to stop early.
fn for_each_subset<E>(
    items: &[usize],
    d: usize,
    mut f: impl FnMut(&[usize]) -> std::result::Result<bool, E>,
) -> std::result::Result<(), E> {
    let n = items.len();
    if d > n {
        return Ok(());
    }
    if d == 0 {
        f(&[])?;
        return Ok(());
    }
    let mut pick: Vec<usize> = (0..d).collect();
    loop {
        let subset: Vec<usize> = pick.iter().map(|&p| items[p]).collect();
        if f(&subset)? {
            return Ok(());
        }
        // Rightmost index that can still advance.
        let mut t = d as isize - 1;
        while t >= 0 && pick[t as usize] == n - d + t as usize {
            t -= 1;
        }
        if t < 0 {
            return Ok(());
        }
        let t = t as usize;
        pick[t] += 1;
        for b in t + 1..d {
            pick[b] = pick[b - 1] + 1;
        }
    }
}

/// PC-stable edge removal over a standardized dataset.
pub fn pc_skeleton<F: Real>(
    data: &Dataset<F>,
    alpha: F,
    bk: &BackgroundKnowledge,
    max_cond: usize,
) -> Result<(Skeleton, Vec<RemovedEdge<F>>)> {
    let k = data.n_cols();
    let corr = CorrelationMatrix::from_dataset(data)?;
    let mut skeleton = Skeleton::complete(k, bk);
    let mut removed = Vec::new();

    for depth in 0..=max_cond {
        // Freeze neighborhoods for the whole depth.
        let frozen: Vec<Vec<usize>> = (0..k).map(|v| skeleton.neighbors(v)).collect();
        if !frozen.iter().any(|nb| nb.len() > depth) {
            break;
        }

        let mut batch: Vec<(usize, usize, Vec<usize>, F)> = Vec::new();
        for (i, j) in skeleton.edges() {
            let mut separated: Option<(Vec<usize>, F)> = None;
            // Conditioning candidates: neighbors of i, then neighbors of j.
            for side in [i, j] {
                if separated.is_some() {
                    break;
                }
                let pool: Vec<usize> = frozen[side]
                    .iter()
                    .copied()
                    .filter(|&v| v != i && v != j)
                    .collect();
                for_each_subset(&pool, depth, |subset| {
                    let res = corr.fisher_z(i, j, subset)?;
                    if res.p_value > alpha {
                        separated = Some((subset.to_vec(), res.p_value));
                        return Ok::<bool, crate::error::Error>(true);
                    }
                    Ok(false)
                })?;
            }
            if let Some((sepset, p)) = separated {
                batch.push((i, j, sepset, p));
            }
        }

        for (i, j, sepset, p) in batch {
            skeleton.remove(i, j, sepset.clone());
            removed.push(RemovedEdge {
                i,
                j,
                sepset,
                p_value: p,
            });
        }
    }

    Ok((skeleton, removed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dataset(cols: Vec<Vec<f64>>, roles: Vec<ColumnRole>) -> Dataset<f64> {
        let names = (0..cols.len()).map(|i| format!("c{i}")).collect();
        Dataset::new(names, roles, cols).unwrap()
    }

    fn param_roles(k: usize) -> Vec<ColumnRole> {
        vec![ColumnRole::Parameter; k]
    }

    fn noise(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| StandardNormal.sample(rng)).collect()
    }

    #[test]
    fn independent_columns_give_an_empty_skeleton() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 20_000;
        let cols = vec![noise(n, &mut rng), noise(n, &mut rng), noise(n, &mut rng)];
        let d = dataset(cols, param_roles(3));
        let bk = BackgroundKnowledge::from_roles(d.roles());
        let (skel, removed) = pc_skeleton(&d, 0.01, &bk, 3).unwrap();
        assert!(skel.edges().is_empty());
        assert_eq!(removed.len(), 3);
    }

    #[test]
    fn chain_skeleton_and_sepset_are_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 20_000;
        let x = noise(n, &mut rng);
        let m: Vec<f64> = x
            .iter()
            .map(|&v| 1.2 * v + 0.8 * StandardNormal.sample::<f64, _>(&mut rng))
            .collect();
        let y: Vec<f64> = m
            .iter()
            .map(|&v| -0.9 * v + 0.8 * StandardNormal.sample::<f64, _>(&mut rng))
            .collect();
        let d = dataset(vec![x, m, y], param_roles(3));
        let bk = BackgroundKnowledge::from_roles(d.roles());
        let (skel, _) = pc_skeleton(&d, 0.01, &bk, 3).unwrap();
        assert_eq!(skel.edges(), vec![(0, 1), (1, 2)]);
        assert_eq!(skel.sepset(0, 2).unwrap(), &vec![1]);
    }

    #[test]
    fn tier_forbidden_pairs_are_never_edges() {
        // Two outcomes can never share an edge.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 5_000;
        let x = noise(n, &mut rng);
        let y1: Vec<f64> = x.iter().map(|&v| v + 0.1 * StandardNormal.sample::<f64, _>(&mut rng)).collect();
        let y2: Vec<f64> = x.iter().map(|&v| v + 0.1 * StandardNormal.sample::<f64, _>(&mut rng)).collect();
        let d = dataset(
            vec![x, y1, y2],
            vec![ColumnRole::Parameter, ColumnRole::Outcome, ColumnRole::Outcome],
        );
        let bk = BackgroundKnowledge::from_roles(d.roles());
        let (skel, _) = pc_skeleton(&d, 0.01, &bk, 3).unwrap();
        assert!(!skel.adjacent(1, 2));
        assert!(skel.adjacent(0, 1));
        assert!(skel.adjacent(0, 2));
    }

    #[test]
    fn skeleton_grows_with_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 2_000;
        let x = noise(n, &mut rng);
        let m: Vec<f64> = x
            .iter()
            .map(|&v| 0.12 * v + StandardNormal.sample::<f64, _>(&mut rng))
            .collect();
        let y: Vec<f64> = m
            .iter()
            .zip(&x)
            .map(|(&mv, &xv)| 0.5 * mv + 0.03 * xv + StandardNormal.sample::<f64, _>(&mut rng))
            .collect();
        let d = dataset(vec![x, m, y], param_roles(3));
        let bk = BackgroundKnowledge::from_roles(d.roles());
        let mut last: Option<Vec<(usize, usize)>> = None;
        for alpha in [0.001, 0.01, 0.05, 0.2] {
            let (skel, _) = pc_skeleton(&d, alpha, &bk, 3).unwrap();
            let edges = skel.edges();
            if let Some(prev) = &last {
                assert!(
                    prev.iter().all(|e| edges.contains(e)),
                    "edges at smaller alpha must be a subset: {prev:?} vs {edges:?}"
                );
            }
            last = Some(edges);
        }
    }

    #[test]
    fn subset_enumeration_is_lexicographic() {
        let mut seen = Vec::new();
        for_each_subset::<()>(&[1, 2, 3, 4], 2, |s| {
            seen.push(s.to_vec());
            Ok(false)
        })
        .unwrap();
        assert_eq!(
            seen,
            vec![
                vec![1, 2],
                vec![1, 3],
                vec![1, 4],
                vec![2, 3],
                vec![2, 4],
                vec![3, 4]
            ]
        );
    }
}
