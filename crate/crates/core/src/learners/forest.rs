//! Random-forest regression: CART trees with exact variance-minimizing
//! splits over midpoint thresholds, bootstrap resampling, and per-node
//! random feature subsets. Tree `t` draws from its own stream
//! (`seed + t`), so fits are reproducible and trees may train in parallel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{real, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ForestConfig<F: Real> {
    pub n_trees: usize,
    /// `None` grows until the leaf-size floor stops splitting.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub feature_fraction: F,
    pub bootstrap: bool,
}

impl<F: Real> Default for ForestConfig<F> {
    fn default() -> Self {
        ForestConfig {
            n_trees: 200,
            max_depth: Some(12),
            min_leaf: 5,
            feature_fraction: real(1.0 / 3.0),
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub enum TreeNode<F: Real> {
    Split {
        feature: usize,
        threshold: F,
        left: usize,
        right: usize,
    },
    Leaf {
        value: F,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Tree<F: Real> {
    pub nodes: Vec<TreeNode<F>>,
}

impl<F: Real> Tree<F> {
    pub fn predict_row(&self, x: &[F]) -> F {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

/// Bagged regression forest; prediction is the mean over trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ForestModel<F: Real> {
    pub trees: Vec<Tree<F>>,
    pub n_features: usize,
    pub config: ForestConfig<F>,
}

impl<F: Real> ForestModel<F> {
    pub fn predict_row(&self, x: &[F]) -> F {
        let sum: F = self.trees.iter().map(|t| t.predict_row(x)).sum();
        sum / F::from_usize_lossy(self.trees.len())
    }
}

struct TreeBuilder<'a, F: Real> {
    x: &'a Matrix<F>,
    y: &'a [F],
    config: &'a ForestConfig<F>,
    nodes: Vec<TreeNode<F>>,
    rng: ChaCha8Rng,
}

impl<'a, F: Real> TreeBuilder<'a, F> {
    fn leaf(&mut self, indices: &[usize]) -> usize {
        let sum: F = indices.iter().map(|&i| self.y[i]).sum();
        let value = sum / F::from_usize_lossy(indices.len());
        self.nodes.push(TreeNode::Leaf { value });
        self.nodes.len() - 1
    }

    fn sample_features(&mut self) -> Vec<usize> {
        let p = self.x.n_cols();
        let frac = self.config.feature_fraction.to_f64_lossy().clamp(0.0, 1.0);
        let k = ((p as f64 * frac).ceil() as usize).clamp(1, p);
        // Partial Fisher-Yates; candidate order is the sampled order.
        let mut pool: Vec<usize> = (0..p).collect();
        let mut out = Vec::with_capacity(k);
        for step in 0..k {
            let pick = step + self.rng.gen_range(0..pool.len() - step);
            pool.swap(step, pick);
            out.push(pool[step]);
        }
        out
    }

    fn build(&mut self, indices: &[usize], depth: usize) -> usize {
        let n = indices.len();
        let depth_capped = self
            .config
            .max_depth
            .map_or(false, |limit| depth >= limit);
        if depth_capped || n < 2 * self.config.min_leaf {
            return self.leaf(indices);
        }
        let first = self.y[indices[0]];
        if indices.iter().all(|&i| self.y[i] == first) {
            return self.leaf(indices);
        }

        let features = self.sample_features();
        let mut best: Option<(F, usize, F, usize)> = None; // (cost, feature, threshold, split_pos)
        let mut sorted = indices.to_vec();
        for &f in &features {
            sorted.sort_by(|&a, &b| {
                self.x
                    .get(a, f)
                    .partial_cmp(&self.x.get(b, f))
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            // Prefix sums of y and y^2 along the sorted order.
            let mut left_sum = F::zero();
            let mut left_sq = F::zero();
            let total_sum: F = sorted.iter().map(|&i| self.y[i]).sum();
            let total_sq: F = sorted.iter().map(|&i| self.y[i] * self.y[i]).sum();
            for pos in 1..n {
                let yi = self.y[sorted[pos - 1]];
                left_sum = left_sum + yi;
                left_sq = left_sq + yi * yi;
                if pos < self.config.min_leaf || n - pos < self.config.min_leaf {
                    continue;
                }
                let xa = self.x.get(sorted[pos - 1], f);
                let xb = self.x.get(sorted[pos], f);
                if xa == xb {
                    continue;
                }
                let nl = F::from_usize_lossy(pos);
                let nr = F::from_usize_lossy(n - pos);
                let right_sum = total_sum - left_sum;
                let right_sq = total_sq - left_sq;
                let cost = (left_sq - left_sum * left_sum / nl)
                    + (right_sq - right_sum * right_sum / nr);
                let better = match &best {
                    None => true,
                    Some((c, ..)) => cost < *c,
                };
                if better {
                    let threshold = (xa + xb) / real(2.0);
                    best = Some((cost, f, threshold, pos));
                }
            }
        }

        let Some((_, feature, threshold, _)) = best else {
            return self.leaf(indices);
        };

        let (left, right): (Vec<usize>, Vec<usize>) = indices
            .iter()
            .copied()
            .partition(|&i| self.x.get(i, feature) <= threshold);
        let slot = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { value: F::zero() }); // placeholder
        let left_id = self.build(&left, depth + 1);
        let right_id = self.build(&right, depth + 1);
        self.nodes[slot] = TreeNode::Split {
            feature,
            threshold,
            left: left_id,
            right: right_id,
        };
        slot
    }
}

fn fit_tree<F: Real>(
    x: &Matrix<F>,
    y: &[F],
    config: &ForestConfig<F>,
    seed: u64,
    tree_index: u64,
) -> Tree<F> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(tree_index));
    let n = x.n_rows();
    let indices: Vec<usize> = if config.bootstrap {
        (0..n).map(|_| rng.gen_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let mut builder = TreeBuilder {
        x,
        y,
        config,
        nodes: Vec::new(),
        rng,
    };
    let root = builder.build(&indices, 0);
    debug_assert_eq!(root, 0);
    Tree {
        nodes: builder.nodes,
    }
}

pub fn fit_random_forest<F: Real>(
    x: &Matrix<F>,
    y: &[F],
    config: &ForestConfig<F>,
    seed: u64,
) -> Result<ForestModel<F>> {
    let n = x.n_rows();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: y.len(),
        });
    }
    if n < 2 * config.min_leaf.max(1) {
        return Err(Error::SampleSize {
            needed: 2 * config.min_leaf.max(1) - 1,
            actual: n,
        });
    }
    if config.n_trees == 0 || x.n_cols() == 0 {
        return Err(Error::Invariant(
            "forest needs at least one tree and one feature".into(),
        ));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("forest training targets".into()));
    }

    let trees: Vec<Tree<F>> = (0..config.n_trees as u64)
        .into_par_iter()
        .map(|t| fit_tree(x, y, config, seed, t))
        .collect();

    Ok(ForestModel {
        trees,
        n_features: x.n_cols(),
        config: config.clone(),
    })
}
