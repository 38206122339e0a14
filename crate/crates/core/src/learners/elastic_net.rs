//! Elastic-net linear regression by cyclic coordinate descent.
//!
//! Objective: `(1/2n) ||y - Xb - b0||^2 + lambda (mix ||b||_1 + (1-mix)/2 ||b||_2^2)`
//! with an unpenalized intercept.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::scalar::{real, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ElasticNetConfig<F: Real> {
    pub lambda: F,
    /// L1/L2 mixing in [0, 1]; 1 is pure lasso.
    pub mixing: F,
    pub tol: F,
    pub max_iter: usize,
    pub fit_intercept: bool,
}

impl<F: Real> Default for ElasticNetConfig<F> {
    fn default() -> Self {
        ElasticNetConfig {
            lambda: real(1e-3),
            mixing: real(0.5),
            tol: real(1e-8),
            max_iter: 1_000,
            fit_intercept: true,
        }
    }
}

/// Affine prediction model `y = intercept + x . coefficients`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LinearModel<F: Real> {
    pub intercept: F,
    pub coefficients: Vec<F>,
    pub lambda: F,
    pub mixing: F,
    pub converged: bool,
    /// Objective value after each full coordinate sweep.
    pub objective_history: Vec<F>,
}

impl<F: Real> LinearModel<F> {
    pub fn predict_row(&self, x: &[F]) -> F {
        self.intercept + dot(x, &self.coefficients)
    }
}

fn soft_threshold<F: Real>(x: F, t: F) -> F {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        F::zero()
    }
}

pub fn fit_elastic_net<F: Real>(
    x: &Matrix<F>,
    y: &[F],
    config: &ElasticNetConfig<F>,
) -> Result<LinearModel<F>> {
    let n = x.n_rows();
    let p = x.n_cols();
    if n == 0 || p == 0 || y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: y.len(),
        });
    }
    if !(config.lambda >= F::zero()) || !(config.mixing >= F::zero() && config.mixing <= F::one()) {
        return Err(Error::Invariant(
            "lambda must be >= 0 and mixing in [0, 1]".into(),
        ));
    }
    let columns: Vec<Vec<F>> = (0..p).map(|j| x.column(j)).collect();
    if y.iter().any(|v| !v.is_finite())
        || columns.iter().any(|c| c.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::NonFinite("elastic-net training data".into()));
    }

    let nf = F::from_usize_lossy(n);
    let col_sq_norm: Vec<F> = columns.iter().map(|c| dot(c, c) / nf).collect();
    let l1 = config.lambda * config.mixing;
    let l2 = config.lambda * (F::one() - config.mixing);

    let mut beta = vec![F::zero(); p];
    let mut intercept = F::zero();
    let mut residual = y.to_vec();
    if config.fit_intercept {
        intercept = residual.iter().copied().sum::<F>() / nf;
        for r in residual.iter_mut() {
            *r = *r - intercept;
        }
    }

    let objective = |residual: &[F], beta: &[F]| -> F {
        let sse = dot(residual, residual) / (real::<F>(2.0) * nf);
        let pen_l1: F = beta.iter().map(|b| b.abs()).sum();
        let pen_l2: F = beta.iter().map(|b| *b * *b).sum();
        sse + l1 * pen_l1 + l2 / real(2.0) * pen_l2
    };

    let mut history = Vec::new();
    let mut converged = false;
    for _sweep in 0..config.max_iter {
        let mut max_change = F::zero();

        if config.fit_intercept {
            let shift = residual.iter().copied().sum::<F>() / nf;
            if shift != F::zero() {
                intercept = intercept + shift;
                for r in residual.iter_mut() {
                    *r = *r - shift;
                }
                max_change = max_change.max(shift.abs());
            }
        }

        for j in 0..p {
            let denom = col_sq_norm[j] + l2;
            if denom <= F::zero() {
                continue;
            }
            let rho = dot(&columns[j], &residual) / nf + col_sq_norm[j] * beta[j];
            let new = soft_threshold(rho, l1) / denom;
            let delta = new - beta[j];
            if delta != F::zero() {
                for (r, &xij) in residual.iter_mut().zip(columns[j].iter()) {
                    *r = *r - delta * xij;
                }
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }

        history.push(objective(&residual, &beta));
        if max_change < config.tol {
            converged = true;
            break;
        }
    }

    Ok(LinearModel {
        intercept,
        coefficients: beta,
        lambda: config.lambda,
        mixing: config.mixing,
        converged,
        objective_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ols_rss;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn config(lambda: f64, mixing: f64) -> ElasticNetConfig<f64> {
        ElasticNetConfig {
            lambda,
            mixing,
            ..ElasticNetConfig::default()
        }
    }

    fn random_matrix(n: usize, p: usize, seed: u64) -> Matrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_rows(
            (0..n)
                .map(|_| (0..p).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
                .collect(),
        )
    }

    #[test]
    fn lambda_zero_recovers_exact_linear_data() {
        let x = random_matrix(200, 2, 1);
        let y: Vec<f64> = (0..200)
            .map(|i| 3.0 * x.get(i, 0) - 2.0 * x.get(i, 1))
            .collect();
        let m = fit_elastic_net(&x, &y, &config(0.0, 0.5)).unwrap();
        assert!(m.converged);
        assert!((m.coefficients[0] - 3.0).abs() < 1e-6);
        assert!((m.coefficients[1] + 2.0).abs() < 1e-6);
        assert!(m.intercept.abs() < 1e-6);
    }

    #[test]
    fn lambda_zero_matches_normal_equations() {
        let x = random_matrix(300, 3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y: Vec<f64> = (0..300)
            .map(|i| {
                1.0 + 0.7 * x.get(i, 0) - 1.3 * x.get(i, 1) + 0.2 * x.get(i, 2)
                    + 0.05 * (rng.gen::<f64>() - 0.5)
            })
            .collect();
        let m = fit_elastic_net(&x, &y, &config(0.0, 0.5)).unwrap();
        let cols: Vec<Vec<f64>> = (0..3).map(|j| x.column(j)).collect();
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        let (beta, _) = ols_rss(&refs, &y).unwrap();
        assert!((m.intercept - beta[0]).abs() < 1e-6);
        for j in 0..3 {
            assert!((m.coefficients[j] - beta[j + 1]).abs() < 1e-6);
        }
    }

    #[test]
    fn huge_lambda_shrinks_everything_to_the_mean() {
        let x = random_matrix(100, 2, 4);
        let y: Vec<f64> = (0..100).map(|i| 5.0 + x.get(i, 0)).collect();
        let m = fit_elastic_net(&x, &y, &config(1e6, 1.0)).unwrap();
        assert!(m.coefficients.iter().all(|&b| b == 0.0));
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!((m.intercept - mean).abs() < 1e-9);
    }

    #[test]
    fn univariate_lasso_matches_closed_form() {
        // Standardized single feature, mixing 1: beta = soft(<x,y>/n, lambda).
        let n = 500;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut col: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let m = crate::stats::mean(&col);
        let s = crate::stats::std_dev(&col);
        for v in col.iter_mut() {
            *v = (*v - m) / s;
        }
        let y: Vec<f64> = col
            .iter()
            .map(|&x| 0.4 * x + 0.1 * (rng.gen::<f64>() - 0.5))
            .collect();
        let xy = crate::linalg::dot(&col, &y) / n as f64;
        let x = Matrix::from_columns(&[&col]);
        for lambda in [0.01, 0.1] {
            let mut cfg = config(lambda, 1.0);
            cfg.fit_intercept = false;
            cfg.tol = 1e-12;
            let model = fit_elastic_net(&x, &y, &cfg).unwrap();
            let closed = soft_threshold(xy, lambda);
            assert!(
                (model.coefficients[0] - closed).abs() < 1e-8,
                "lambda {lambda}: {} vs {closed}",
                model.coefficients[0]
            );
        }
    }

    #[test]
    fn objective_never_increases_across_sweeps() {
        let x = random_matrix(150, 4, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let y: Vec<f64> = (0..150)
            .map(|i| x.get(i, 0) - 0.5 * x.get(i, 2) + 0.3 * rng.gen::<f64>())
            .collect();
        let m = fit_elastic_net(&x, &y, &config(0.05, 0.7)).unwrap();
        for w in m.objective_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "objective rose: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let x = Matrix::from_rows(vec![vec![1.0, f64::NAN]]);
        let err = fit_elastic_net(&x, &[1.0], &config(0.0, 0.5)).unwrap_err();
        assert_eq!(err.category(), "data");
    }

    #[test]
    fn hitting_max_iter_reports_converged_false() {
        let x = random_matrix(100, 3, 8);
        let y: Vec<f64> = (0..100).map(|i| x.get(i, 0) * 2.0).collect();
        let mut cfg = config(0.0, 0.5);
        cfg.max_iter = 1;
        cfg.tol = 1e-15;
        let m = fit_elastic_net(&x, &y, &cfg).unwrap();
        assert!(!m.converged);
    }
}
