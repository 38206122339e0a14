//! Orientation of the PC skeleton: tier-forced directions, v-structure
//! detection against the recorded separating sets, Meek rules 1-4 to
//! closure, and a Dor-Tarsi consistent extension for the score stage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::skeleton::{BackgroundKnowledge, Skeleton};

/// Why an edge points the way it does; carried into the discovery report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeOrigin {
    Tier,
    VStructure,
    Meek,
    Extension,
    Score,
    ScoreAdded,
}

/// Mixed graph: some skeleton edges directed, the rest undirected.
#[derive(Debug, Clone, PartialEq)]
pub struct Pdag {
    k: usize,
    directed: Vec<Vec<bool>>,   // directed[a][b]: a -> b
    undirected: Vec<Vec<bool>>, // symmetric
    origins: std::collections::BTreeMap<(usize, usize), EdgeOrigin>,
}

impl Pdag {
    pub fn from_skeleton(skeleton: &Skeleton) -> Self {
        let k = skeleton.len();
        let mut undirected = vec![vec![false; k]; k];
        for (a, b) in skeleton.edges() {
            undirected[a][b] = true;
            undirected[b][a] = true;
        }
        Pdag {
            k,
            directed: vec![vec![false; k]; k],
            undirected,
            origins: Default::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    pub fn has_directed(&self, a: usize, b: usize) -> bool {
        self.directed[a][b]
    }

    pub fn has_undirected(&self, a: usize, b: usize) -> bool {
        self.undirected[a][b]
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.directed[a][b] || self.directed[b][a] || self.undirected[a][b]
    }

    pub fn origin(&self, a: usize, b: usize) -> Option<EdgeOrigin> {
        self.origins.get(&(a, b)).copied()
    }

    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.k {
            for b in 0..self.k {
                if self.directed[a][b] {
                    out.push((a, b));
                }
            }
        }
        out
    }

    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.k {
            for b in a + 1..self.k {
                if self.undirected[a][b] {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Directs `a -> b`. Fails if the opposite direction is already set.
    fn direct(&mut self, a: usize, b: usize, origin: EdgeOrigin) -> Result<()> {
        if self.directed[b][a] {
            return Err(Error::OrientationConflict {
                edges: vec![format!("{a}->{b}"), format!("{b}->{a}")],
            });
        }
        self.undirected[a][b] = false;
        self.undirected[b][a] = false;
        if !self.directed[a][b] {
            self.directed[a][b] = true;
            self.origins.insert((a, b), origin);
        }
        Ok(())
    }

    /// Any directed path from `from` to `to`?
    fn has_directed_path(&self, from: usize, to: usize) -> bool {
        let mut seen = vec![false; self.k];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            for w in 0..self.k {
                if self.directed[v][w] && !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        false
    }

    fn check_acyclic(&self) -> Result<()> {
        for a in 0..self.k {
            for b in 0..self.k {
                if self.directed[a][b] && self.has_directed_path(b, a) {
                    return Err(Error::OrientationConflict {
                        edges: vec![format!("cycle through {a}->{b}")],
                    });
                }
            }
        }
        Ok(())
    }
}

/// Tier orientations, v-structures, then Meek rules 1-4 to fixpoint.
pub fn orient(skeleton: &Skeleton, bk: &BackgroundKnowledge) -> Result<Pdag> {
    let mut pdag = Pdag::from_skeleton(skeleton);
    let k = pdag.len();

    // Cross-tier edges are forced by the background knowledge.
    for (a, b) in skeleton.edges() {
        if let Some((from, to)) = bk.forced_direction(a, b) {
            pdag.direct(from, to, EdgeOrigin::Tier)?;
        }
    }

    // V-structures: a - c - b with a, b nonadjacent and c outside their
    // separating set. Enumerated in ascending (c, a, b); earlier
    // orientations win, and any arm that would contradict a tier rule or an
    // existing arrow skips the whole collider.
    for c in 0..k {
        for a in 0..k {
            if a == c || !skeleton.adjacent(a, c) {
                continue;
            }
            for b in a + 1..k {
                if b == c || !skeleton.adjacent(b, c) || skeleton.adjacent(a, b) {
                    continue;
                }
                let sep = skeleton.sepset(a, b);
                let in_sep = sep.map_or(true, |s| s.contains(&c));
                if in_sep {
                    continue;
                }
                let legal = |x: usize| -> bool {
                    bk.edge_allowed(x, c) && !pdag.directed[c][x]
                };
                if legal(a) && legal(b) {
                    pdag.direct(a, c, EdgeOrigin::VStructure)?;
                    pdag.direct(b, c, EdgeOrigin::VStructure)?;
                }
            }
        }
    }

    meek_closure(&mut pdag)?;
    pdag.check_acyclic()?;
    Ok(pdag)
}

/// Meek rules applied until nothing changes. Only same-tier edges remain
/// undirected at this point, so every orientation below is tier-legal.
fn meek_closure(pdag: &mut Pdag) -> Result<()> {
    loop {
        let mut changed = false;
        for (a, b) in pdag.undirected_edges() {
            for (x, y) in [(a, b), (b, a)] {
                if apply_meek_rules(pdag, x, y)? {
                    changed = true;
                    break;
                }
            }
        }
        if !changed {
            return Ok(());
        }
    }
}

/// Tries to orient `x -> y` using one of Meek's four rules.
fn apply_meek_rules(pdag: &mut Pdag, x: usize, y: usize) -> Result<bool> {
    let k = pdag.len();

    // Rule 1: some w -> x with w, y nonadjacent forces x -> y.
    for w in 0..k {
        if pdag.directed[w][x] && w != y && !pdag.adjacent(w, y) {
            pdag.direct(x, y, EdgeOrigin::Meek)?;
            return Ok(true);
        }
    }
    // Rule 2: a directed path x -> w -> y forces x -> y.
    for w in 0..k {
        if pdag.directed[x][w] && pdag.directed[w][y] {
            pdag.direct(x, y, EdgeOrigin::Meek)?;
            return Ok(true);
        }
    }
    // Rule 3: x - w1, x - w2, w1 -> y, w2 -> y, w1, w2 nonadjacent.
    for w1 in 0..k {
        if !pdag.undirected[x][w1] || !pdag.directed[w1][y] {
            continue;
        }
        for w2 in w1 + 1..k {
            if pdag.undirected[x][w2] && pdag.directed[w2][y] && !pdag.adjacent(w1, w2) {
                pdag.direct(x, y, EdgeOrigin::Meek)?;
                return Ok(true);
            }
        }
    }
    // Rule 4: x - w, w -> z, z -> y, w, y nonadjacent, x adjacent to z.
    for w in 0..k {
        if !pdag.undirected[x][w] {
            continue;
        }
        for z in 0..k {
            if pdag.directed[w][z]
                && pdag.directed[z][y]
                && !pdag.adjacent(w, y)
                && pdag.adjacent(x, z)
            {
                pdag.direct(x, y, EdgeOrigin::Meek)?;
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Dor-Tarsi consistent extension: returns the full directed edge list with
/// per-edge origins. Cross-tier undirected edges (possible when a raw PDAG
/// arrives here without the orient pass) are first forced by tier.
pub fn consistent_extension(
    pdag: &Pdag,
    bk: &BackgroundKnowledge,
) -> Result<Vec<(usize, usize, EdgeOrigin)>> {
    let mut work = pdag.clone();
    for (a, b) in work.undirected_edges() {
        if let Some((from, to)) = bk.forced_direction(a, b) {
            work.direct(from, to, EdgeOrigin::Tier)?;
        }
    }

    let k = work.len();
    let mut alive: Vec<bool> = vec![true; k];
    let mut remaining = k;
    while remaining > 0 {
        let mut found = None;
        'scan: for x in 0..k {
            if !alive[x] {
                continue;
            }
            // x must be a sink among the live directed edges.
            for w in 0..k {
                if alive[w] && work.directed[x][w] {
                    continue 'scan;
                }
            }
            // Every undirected neighbor of x must be adjacent to all other
            // live neighbors of x.
            let neighbors: Vec<usize> = (0..k)
                .filter(|&w| {
                    alive[w]
                        && (work.undirected[x][w] || work.directed[w][x] || work.directed[x][w])
                })
                .collect();
            for u in 0..k {
                if !alive[u] || !work.undirected[x][u] {
                    continue;
                }
                for &other in &neighbors {
                    if other != u && !work.adjacent(u, other) {
                        continue 'scan;
                    }
                }
            }
            found = Some(x);
            break;
        }
        let Some(x) = found else {
            return Err(Error::OrientationConflict {
                edges: vec!["partially directed graph admits no consistent extension".into()],
            });
        };
        for u in 0..k {
            if alive[u] && work.undirected[x][u] {
                work.direct(u, x, EdgeOrigin::Extension)?;
            }
        }
        alive[x] = false;
        remaining -= 1;
    }

    work.check_acyclic()?;
    Ok(work
        .directed_edges()
        .into_iter()
        .map(|(a, b)| {
            let origin = work.origin(a, b).unwrap_or(EdgeOrigin::Extension);
            (a, b, origin)
        })
        .collect())
}
