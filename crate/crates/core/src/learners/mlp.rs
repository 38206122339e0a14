//! Multilayer perceptron regressor: tanh hidden layers, identity output,
//! trained by shuffled mini-batch gradient descent with momentum on
//! `MSE/2 + (decay/2) ||W||^2`. Training is sequential per model so the
//! accumulation order, and therefore the fit, is bit-reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, Matrix};
use crate::scalar::{real, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MlpConfig<F: Real> {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: F,
    pub momentum: F,
    pub weight_decay: F,
}

impl<F: Real> Default for MlpConfig<F> {
    fn default() -> Self {
        MlpConfig {
            hidden: vec![64],
            epochs: 200,
            batch_size: 256,
            learning_rate: real(1e-2),
            momentum: real(0.9),
            weight_decay: real(1e-4),
        }
    }
}

impl<F: Real> MlpConfig<F> {
    /// The wide two-hidden-layer configuration used by the neural baseline.
    pub fn wide_baseline() -> Self {
        MlpConfig {
            hidden: vec![128, 64],
            epochs: 300,
            ..MlpConfig::default()
        }
    }
}

/// Dense layer: `weights` is `out_dim x in_dim` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Layer<F: Real> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<F>,
    pub biases: Vec<F>,
}

impl<F: Real> Layer<F> {
    fn seeded(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        // Symmetric uniform init scaled by fan-in; biases start at zero.
        let bound = 1.0 / (in_dim as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| real::<F>((rng.gen::<f64>() * 2.0 - 1.0) * bound))
            .collect();
        Layer {
            in_dim,
            out_dim,
            weights,
            biases: vec![F::zero(); out_dim],
        }
    }

    #[inline]
    fn weight_row(&self, unit: usize) -> &[F] {
        &self.weights[unit * self.in_dim..(unit + 1) * self.in_dim]
    }
}

/// Feed-forward regressor with tanh hidden activations and a single linear
/// output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MlpModel<F: Real> {
    pub layers: Vec<Layer<F>>,
    /// Mean data loss (`MSE/2`) per epoch, in training order.
    pub loss_history: Vec<F>,
}

impl<F: Real> MlpModel<F> {
    pub fn n_features(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    /// Fresh network with seeded weights; equivalent to a zero-epoch fit.
    pub fn initialized(n_features: usize, config: &MlpConfig<F>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dims = vec![n_features];
        dims.extend_from_slice(&config.hidden);
        dims.push(1);
        let layers = dims
            .windows(2)
            .map(|w| Layer::seeded(w[0], w[1], &mut rng))
            .collect();
        MlpModel {
            layers,
            loss_history: Vec::new(),
        }
    }

    pub fn predict_row(&self, x: &[F]) -> F {
        let mut cur = x.to_vec();
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let mut next = vec![F::zero(); layer.out_dim];
            for (u, slot) in next.iter_mut().enumerate() {
                let z = dot(layer.weight_row(u), &cur) + layer.biases[u];
                *slot = if li == last { z } else { z.tanh() };
            }
            cur = next;
        }
        cur[0]
    }

    /// Activations of every layer for one input; used by backprop.
    fn forward_trace(&self, x: &[F]) -> Vec<Vec<F>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let prev = &acts[li];
            let mut out = vec![F::zero(); layer.out_dim];
            for (u, slot) in out.iter_mut().enumerate() {
                let z = dot(layer.weight_row(u), prev) + layer.biases[u];
                *slot = if li == last { z } else { z.tanh() };
            }
            acts.push(out);
        }
        acts
    }

    /// Loss on a batch: `(1/2m) sum (f(x) - y)^2 + (decay/2) sum W^2`.
    /// Biases are not decayed.
    pub fn batch_loss(&self, x: &Matrix<F>, y: &[F], weight_decay: F) -> F {
        let m = F::from_usize_lossy(x.n_rows());
        let mut sse = F::zero();
        for i in 0..x.n_rows() {
            let d = self.predict_row(x.row(i)) - y[i];
            sse = sse + d * d;
        }
        let mut reg = F::zero();
        for layer in &self.layers {
            reg = reg + dot(&layer.weights, &layer.weights);
        }
        sse / (real::<F>(2.0) * m) + weight_decay / real(2.0) * reg
    }

    /// Analytic gradients of [`Self::batch_loss`] in layer order,
    /// `(d_weights, d_biases)` per layer.
    pub fn batch_gradients(
        &self,
        x: &Matrix<F>,
        y: &[F],
        weight_decay: F,
    ) -> Vec<(Vec<F>, Vec<F>)> {
        let mut grads: Vec<(Vec<F>, Vec<F>)> = self
            .layers
            .iter()
            .map(|l| {
                (
                    vec![F::zero(); l.weights.len()],
                    vec![F::zero(); l.out_dim],
                )
            })
            .collect();
        let m = F::from_usize_lossy(x.n_rows());
        let last = self.layers.len() - 1;
        for i in 0..x.n_rows() {
            let acts = self.forward_trace(x.row(i));
            // Output delta of the squared-error term.
            let mut delta = vec![(acts[last + 1][0] - y[i]) / m];
            for li in (0..self.layers.len()).rev() {
                let layer = &self.layers[li];
                let input = &acts[li];
                let (gw, gb) = &mut grads[li];
                for (u, &du) in delta.iter().enumerate() {
                    axpy(du, input, &mut gw[u * layer.in_dim..(u + 1) * layer.in_dim]);
                    gb[u] = gb[u] + du;
                }
                if li > 0 {
                    let mut prev_delta = vec![F::zero(); layer.in_dim];
                    for (u, &du) in delta.iter().enumerate() {
                        axpy(du, layer.weight_row(u), &mut prev_delta);
                    }
                    // tanh'(z) = 1 - a^2 with a the stored activation.
                    for (pd, &a) in prev_delta.iter_mut().zip(input.iter()) {
                        *pd = *pd * (F::one() - a * a);
                    }
                    delta = prev_delta;
                }
            }
        }
        for (layer, (gw, _)) in self.layers.iter().zip(grads.iter_mut()) {
            for (g, &w) in gw.iter_mut().zip(layer.weights.iter()) {
                *g = *g + weight_decay * w;
            }
        }
        grads
    }
}

/// Trains an MLP. Deterministic for a fixed seed: weight init and the
/// per-epoch shuffles come from one seeded stream and updates run in index
/// order.
pub fn fit_mlp<F: Real>(
    x: &Matrix<F>,
    y: &[F],
    config: &MlpConfig<F>,
    seed: u64,
) -> Result<MlpModel<F>> {
    let n = x.n_rows();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: y.len(),
        });
    }
    if config.batch_size == 0 || n < config.batch_size.min(1) {
        return Err(Error::SampleSize {
            needed: config.batch_size,
            actual: n,
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("mlp training targets".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = {
        let mut dims = vec![x.n_cols()];
        dims.extend_from_slice(&config.hidden);
        dims.push(1);
        let layers = dims
            .windows(2)
            .map(|w| Layer::seeded(w[0], w[1], &mut rng))
            .collect();
        MlpModel {
            layers,
            loss_history: Vec::new(),
        }
    };

    let mut velocity: Vec<(Vec<F>, Vec<F>)> = model
        .layers
        .iter()
        .map(|l| (vec![F::zero(); l.weights.len()], vec![F::zero(); l.out_dim]))
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    let batch = config.batch_size.min(n);
    let last = model.layers.len() - 1;

    // Per-sample scratch reused across the whole fit.
    let mut acts: Vec<Vec<F>> = Vec::new();
    acts.push(vec![F::zero(); x.n_cols()]);
    for l in &model.layers {
        acts.push(vec![F::zero(); l.out_dim]);
    }

    for epoch in 0..config.epochs {
        // Fisher-Yates shuffle of the whole index set.
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }

        let mut epoch_sse = F::zero();
        let mut start = 0;
        while start < n {
            let end = (start + batch).min(n);
            let rows = &order[start..end];
            let m = F::from_usize_lossy(rows.len());

            let mut grads: Vec<(Vec<F>, Vec<F>)> = model
                .layers
                .iter()
                .map(|l| (vec![F::zero(); l.weights.len()], vec![F::zero(); l.out_dim]))
                .collect();

            for &row in rows {
                acts[0].copy_from_slice(x.row(row));
                for li in 0..model.layers.len() {
                    let layer = &model.layers[li];
                    let (before, after) = acts.split_at_mut(li + 1);
                    let prev = &before[li];
                    let out = &mut after[0];
                    for u in 0..layer.out_dim {
                        let z = dot(layer.weight_row(u), prev) + layer.biases[u];
                        out[u] = if li == last { z } else { z.tanh() };
                    }
                }
                let err = acts[last + 1][0] - y[row];
                epoch_sse = epoch_sse + err * err;

                let mut delta = vec![err / m];
                for li in (0..model.layers.len()).rev() {
                    let layer = &model.layers[li];
                    let input = &acts[li];
                    let (gw, gb) = &mut grads[li];
                    for (u, &du) in delta.iter().enumerate() {
                        axpy(du, input, &mut gw[u * layer.in_dim..(u + 1) * layer.in_dim]);
                        gb[u] = gb[u] + du;
                    }
                    if li > 0 {
                        let mut prev_delta = vec![F::zero(); layer.in_dim];
                        for (u, &du) in delta.iter().enumerate() {
                            axpy(du, layer.weight_row(u), &mut prev_delta);
                        }
                        for (pd, &a) in prev_delta.iter_mut().zip(input.iter()) {
                            *pd = *pd * (F::one() - a * a);
                        }
                        delta = prev_delta;
                    }
                }
            }

            for (li, layer) in model.layers.iter_mut().enumerate() {
                let (gw, gb) = &grads[li];
                let (vw, vb) = &mut velocity[li];
                for k in 0..layer.weights.len() {
                    let g = gw[k] + config.weight_decay * layer.weights[k];
                    vw[k] = config.momentum * vw[k] - config.learning_rate * g;
                    layer.weights[k] = layer.weights[k] + vw[k];
                }
                for k in 0..layer.out_dim {
                    vb[k] = config.momentum * vb[k] - config.learning_rate * gb[k];
                    layer.biases[k] = layer.biases[k] + vb[k];
                }
            }

            start = end;
        }

        let epoch_loss = epoch_sse / (real::<F>(2.0) * F::from_usize_lossy(n));
        if !epoch_loss.is_finite() {
            return Err(Error::TrainingDivergence { epoch });
        }
        model.loss_history.push(epoch_loss);
    }

    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_fixture(n: usize) -> (Matrix<f64>, Vec<f64>) {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| vec![-1.0 + 2.0 * i as f64 / (n - 1) as f64])
            .collect();
        let y = rows.iter().map(|r| 2.0 * r[0]).collect();
        (Matrix::from_rows(rows), y)
    }

    #[test]
    fn zero_epoch_fit_equals_initialized_network() {
        let (x, y) = line_fixture(32);
        let cfg = MlpConfig {
            hidden: vec![8],
            epochs: 0,
            ..MlpConfig::default()
        };
        let fit = fit_mlp(&x, &y, &cfg, 7).unwrap();
        let init = MlpModel::initialized(1, &cfg, 7);
        assert!(fit.loss_history.is_empty());
        for i in 0..x.n_rows() {
            assert_eq!(fit.predict_row(x.row(i)), init.predict_row(x.row(i)));
        }
    }

    #[test]
    fn learns_a_linear_target() {
        let (x, y) = line_fixture(256);
        let cfg = MlpConfig {
            hidden: vec![8],
            epochs: 500,
            batch_size: 32,
            weight_decay: 0.0,
            ..MlpConfig::default()
        };
        let m = fit_mlp(&x, &y, &cfg, 11).unwrap();
        let mse: f64 = (0..x.n_rows())
            .map(|i| {
                let d = m.predict_row(x.row(i)) - y[i];
                d * d
            })
            .sum::<f64>()
            / x.n_rows() as f64;
        assert!(mse < 1e-3, "test mse {mse}");
    }

    #[test]
    fn zero_network_outputs_its_output_bias() {
        let cfg = MlpConfig {
            hidden: vec![4],
            ..MlpConfig::default()
        };
        let mut m = MlpModel::initialized(3, &cfg, 1);
        for layer in &mut m.layers {
            layer.weights.iter_mut().for_each(|w| *w = 0.0);
            layer.biases.iter_mut().for_each(|b| *b = 0.0);
        }
        m.layers.last_mut().unwrap().biases[0] = 0.75;
        assert_eq!(m.predict_row(&[5.0, -2.0, 0.1]), 0.75);
        assert_eq!(m.predict_row(&[0.0, 0.0, 0.0]), 0.75);
    }

    #[test]
    fn fits_are_reproducible_for_a_fixed_seed() {
        let (x, y) = line_fixture(64);
        let cfg = MlpConfig {
            hidden: vec![8],
            epochs: 20,
            batch_size: 16,
            ..MlpConfig::default()
        };
        let a = fit_mlp(&x, &y, &cfg, 5).unwrap();
        let b = fit_mlp(&x, &y, &cfg, 5).unwrap();
        assert_eq!(a, b);
    }

    fn max_gradient_error(hidden: Vec<usize>) -> f64 {
        let x = Matrix::from_rows(vec![
            vec![0.2, -0.4],
            vec![1.1, 0.3],
            vec![-0.7, 0.9],
            vec![0.05, -1.2],
            vec![0.6, 0.6],
        ]);
        let y = vec![0.3, -0.2, 0.8, 0.1, -0.5];
        let cfg = MlpConfig {
            hidden,
            ..MlpConfig::default()
        };
        let model = MlpModel::initialized(2, &cfg, 13);
        let wd = 1e-4;
        let analytic = model.batch_gradients(&x, &y, wd);
        let eps = 1e-5;
        let mut worst = 0.0_f64;
        for li in 0..model.layers.len() {
            for k in 0..model.layers[li].weights.len() + model.layers[li].biases.len() {
                let mut plus = model.clone();
                let mut minus = model.clone();
                let (ga, is_weight, idx) = if k < model.layers[li].weights.len() {
                    (analytic[li].0[k], true, k)
                } else {
                    let b = k - model.layers[li].weights.len();
                    (analytic[li].1[b], false, b)
                };
                if is_weight {
                    plus.layers[li].weights[idx] += eps;
                    minus.layers[li].weights[idx] -= eps;
                } else {
                    plus.layers[li].biases[idx] += eps;
                    minus.layers[li].biases[idx] -= eps;
                }
                let numeric =
                    (plus.batch_loss(&x, &y, wd) - minus.batch_loss(&x, &y, wd)) / (2.0 * eps);
                let denom = ga.abs().max(numeric.abs()).max(1e-8);
                worst = worst.max((ga - numeric).abs() / denom);
            }
        }
        worst
    }

    #[test]
    fn analytic_gradients_match_central_differences() {
        assert!(max_gradient_error(vec![16]) < 1e-4);
        assert!(max_gradient_error(vec![128, 64]) < 1e-4);
    }

    #[test]
    fn divergence_is_reported_with_the_epoch() {
        let (x, y) = line_fixture(64);
        let cfg = MlpConfig {
            hidden: vec![8],
            epochs: 200,
            batch_size: 64,
            learning_rate: 1e4,
            ..MlpConfig::default()
        };
        match fit_mlp(&x, &y, &cfg, 3) {
            Err(Error::TrainingDivergence { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
