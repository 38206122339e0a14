//! Greedy hill climb over DAGs under the node-decomposed Gaussian BIC
//! score, starting from a consistent extension of the oriented PDAG. Edge
//! additions are restricted to skeleton-adjacent pairs; every move respects
//! tiers, acyclicity, and the in-degree cap. Enumeration order is fixed, so
//! the climb is reproducible.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::ols_rss;
use crate::scalar::{real, Real};
use crate::tabular::Dataset;

use super::orient::{consistent_extension, EdgeOrigin, Pdag};
use super::skeleton::{BackgroundKnowledge, Skeleton};

/// Minimum total-score improvement for a move to count; absorbs float noise.
const IMPROVEMENT_EPS: f64 = 1e-9;

/// Node score: `-(n/2) ln(RSS/n) - (k/2) ln(n)` with `k = |parents| + 1`.
fn node_score<F: Real>(
    data: &Dataset<F>,
    node: usize,
    parents: &[usize],
    cache: &mut BTreeMap<(usize, Vec<usize>), Option<F>>,
) -> Option<F> {
    let key = (node, parents.to_vec());
    if let Some(v) = cache.get(&key) {
        return *v;
    }
    let n = data.n_rows();
    let nf = F::from_usize_lossy(n);
    let cols: Vec<&[F]> = parents.iter().map(|&p| data.column(p)).collect();
    let score = ols_rss(&cols, data.column(node)).map(|(_, rss)| {
        let mean_rss = (rss / nf).max(F::min_positive_value());
        let params = F::from_usize_lossy(parents.len() + 1);
        -(nf / real(2.0)) * mean_rss.ln() - params / real(2.0) * nf.ln()
    });
    cache.insert(key, score);
    score
}

struct ClimbState {
    parents: Vec<Vec<usize>>, // sorted
    children: Vec<Vec<usize>>,
}

impl ClimbState {
    fn has_edge(&self, from: usize, to: usize) -> bool {
        self.parents[to].binary_search(&from).is_ok()
    }

    fn add(&mut self, from: usize, to: usize) {
        if let Err(pos) = self.parents[to].binary_search(&from) {
            self.parents[to].insert(pos, from);
        }
        if let Err(pos) = self.children[from].binary_search(&to) {
            self.children[from].insert(pos, to);
        }
    }

    fn remove(&mut self, from: usize, to: usize) {
        if let Ok(pos) = self.parents[to].binary_search(&from) {
            self.parents[to].remove(pos);
        }
        if let Ok(pos) = self.children[from].binary_search(&to) {
            self.children[from].remove(pos);
        }
    }

    /// Directed path from -> to (used to keep moves acyclic).
    fn has_path(&self, from: usize, to: usize) -> bool {
        let k = self.parents.len();
        let mut seen = vec![false; k];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            for &w in &self.children[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        false
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (to, ps) in self.parents.iter().enumerate() {
            for &from in ps {
                out.push((from, to));
            }
        }
        out.sort_unstable();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Move {
    Delete(usize, usize),
    Reverse(usize, usize),
    Add(usize, usize),
}

/// Result of the refinement: edge list with orientation origins plus the
/// total-score trajectory (starting extension first, one entry per accepted
/// move).
pub struct Refinement<F: Real> {
    pub edges: Vec<(usize, usize, EdgeOrigin)>,
    pub score_trajectory: Vec<F>,
}

pub fn refine_score<F: Real>(
    data: &Dataset<F>,
    pdag: &Pdag,
    skeleton: &Skeleton,
    bk: &BackgroundKnowledge,
    max_indegree: usize,
) -> Result<Refinement<F>> {
    let k = pdag.len();
    let start_edges = consistent_extension(pdag, bk)?;
    let mut origins: BTreeMap<(usize, usize), EdgeOrigin> = start_edges
        .iter()
        .map(|&(a, b, o)| ((a, b), o))
        .collect();

    let mut state = ClimbState {
        parents: vec![Vec::new(); k],
        children: vec![Vec::new(); k],
    };
    for &(a, b, _) in &start_edges {
        state.add(a, b);
    }

    let mut cache: BTreeMap<(usize, Vec<usize>), Option<F>> = BTreeMap::new();
    let mut scores: Vec<F> = Vec::with_capacity(k);
    for node in 0..k {
        let s = node_score(data, node, &state.parents[node], &mut cache).ok_or_else(|| {
            Error::DegenerateData {
                columns: vec![data.name(node).to_string()],
            }
        })?;
        scores.push(s);
    }
    let mut total: F = scores.iter().copied().sum();
    let mut trajectory = vec![total];

    let eps = real::<F>(IMPROVEMENT_EPS);
    // Hard cap against pathological cycling; never reached in practice.
    for _ in 0..10_000 {
        let mut best: Option<(F, Move)> = None;

        let consider = |gain: F, mv: Move, best: &mut Option<(F, Move)>| {
            if gain > eps {
                let better = match best {
                    None => true,
                    Some((g, _)) => gain > *g,
                };
                if better {
                    *best = Some((gain, mv));
                }
            }
        };

        let edges = state.edges();
        for &(from, to) in &edges {
            // Delete.
            let without: Vec<usize> = state.parents[to]
                .iter()
                .copied()
                .filter(|&p| p != from)
                .collect();
            if let Some(s) = node_score(data, to, &without, &mut cache) {
                consider(s - scores[to], Move::Delete(from, to), &mut best);
            }
            // Reverse.
            if bk.edge_allowed(to, from) && state.parents[from].len() < max_indegree {
                state.remove(from, to);
                let creates_cycle = state.has_path(from, to);
                state.add(from, to);
                if !creates_cycle {
                    let mut from_parents = state.parents[from].clone();
                    if let Err(pos) = from_parents.binary_search(&to) {
                        from_parents.insert(pos, to);
                    }
                    let s_to = node_score(data, to, &without, &mut cache);
                    let s_from = node_score(data, from, &from_parents, &mut cache);
                    if let (Some(st), Some(sf)) = (s_to, s_from) {
                        let gain = (st - scores[to]) + (sf - scores[from]);
                        consider(gain, Move::Reverse(from, to), &mut best);
                    }
                }
            }
        }
        // Additions between skeleton-adjacent pairs without a current edge.
        for (a, b) in skeleton.edges() {
            if state.has_edge(a, b) || state.has_edge(b, a) {
                continue;
            }
            for (from, to) in [(a, b), (b, a)] {
                if !bk.edge_allowed(from, to)
                    || state.parents[to].len() >= max_indegree
                    || state.has_path(to, from)
                {
                    continue;
                }
                let mut with: Vec<usize> = state.parents[to].clone();
                if let Err(pos) = with.binary_search(&from) {
                    with.insert(pos, from);
                }
                if let Some(s) = node_score(data, to, &with, &mut cache) {
                    consider(s - scores[to], Move::Add(from, to), &mut best);
                }
            }
        }

        let Some((gain, mv)) = best else { break };
        match mv {
            Move::Delete(from, to) => {
                state.remove(from, to);
                origins.remove(&(from, to));
            }
            Move::Reverse(from, to) => {
                state.remove(from, to);
                state.add(to, from);
                origins.remove(&(from, to));
                origins.insert((to, from), EdgeOrigin::Score);
            }
            Move::Add(from, to) => {
                state.add(from, to);
                origins.insert((from, to), EdgeOrigin::ScoreAdded);
            }
        }
        for node in 0..k {
            if let Some(s) = node_score(data, node, &state.parents[node], &mut cache) {
                scores[node] = s;
            }
        }
        total = total + gain;
        trajectory.push(total);
    }

    let edges = state
        .edges()
        .into_iter()
        .map(|(a, b)| {
            let origin = origins.get(&(a, b)).copied().unwrap_or(EdgeOrigin::Score);
            (a, b, origin)
        })
        .collect();
    Ok(Refinement {
        edges,
        score_trajectory: trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discovery::orient::orient;
    use crate::tabular::{standardize, ColumnRole};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn chain_data(n: usize, seed: u64) -> Dataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let m: Vec<f64> = x
            .iter()
            .map(|&v| 1.1 * v + 0.7 * StandardNormal.sample::<f64, _>(&mut rng))
            .collect();
        let y: Vec<f64> = m
            .iter()
            .map(|&v| -0.9 * v + 0.7 * StandardNormal.sample::<f64, _>(&mut rng))
            .collect();
        Dataset::new(
            vec!["X".into(), "M".into(), "Y".into()],
            vec![
                ColumnRole::Parameter,
                ColumnRole::Intermediate,
                ColumnRole::Outcome,
            ],
            vec![x, m, y],
        )
        .unwrap()
    }

    #[test]
    fn tiers_force_the_chain_direction() {
        let data = chain_data(5_000, 1);
        let (std_data, _) = standardize(&data).unwrap();
        let bk = BackgroundKnowledge::from_roles(std_data.roles());
        let skel = {
            let mut s = Skeleton::from_edges(3, &[(0, 1), (1, 2)]);
            s.set_sepset(0, 2, vec![1]);
            s
        };
        let pdag = Pdag::from_skeleton(&skel);
        let refinement = refine_score(&std_data, &pdag, &skel, &bk, 6).unwrap();
        let plain: Vec<(usize, usize)> = refinement.edges.iter().map(|&(a, b, _)| (a, b)).collect();
        assert_eq!(plain, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn score_never_decreases_along_the_trajectory() {
        let data = chain_data(5_000, 2);
        let (std_data, _) = standardize(&data).unwrap();
        let bk = BackgroundKnowledge::from_roles(std_data.roles());
        // Start from the full skeleton including the spurious X - Y edge.
        let skel = {
            let mut s = Skeleton::from_edges(3, &[(0, 1), (1, 2), (0, 2)]);
            s.set_sepset(0, 2, vec![1]);
            s
        };
        let pdag = orient(&skel, &bk).unwrap();
        let refinement = refine_score(&std_data, &pdag, &skel, &bk, 6).unwrap();
        for w in refinement.score_trajectory.windows(2) {
            assert!(w[1] >= w[0]);
        }
        // The climb should delete the spurious direct edge.
        let plain: Vec<(usize, usize)> = refinement.edges.iter().map(|&(a, b, _)| (a, b)).collect();
        assert_eq!(plain, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn locally_optimal_directed_pdag_is_returned_unchanged() {
        let data = chain_data(5_000, 3);
        let (std_data, _) = standardize(&data).unwrap();
        let bk = BackgroundKnowledge::from_roles(std_data.roles());
        let skel = {
            let mut s = Skeleton::from_edges(3, &[(0, 1), (1, 2)]);
            s.set_sepset(0, 2, vec![1]);
            s
        };
        let pdag = orient(&skel, &bk).unwrap();
        // Tiers orient everything here, so the extension is the true chain.
        let refinement = refine_score(&std_data, &pdag, &skel, &bk, 6).unwrap();
        assert_eq!(refinement.score_trajectory.len(), 1);
    }
}
