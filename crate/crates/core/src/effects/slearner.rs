//! Single-model neural baseline and what-if prediction: one MLP fit on
//! `(T, X) -> Y`, effects read off as prediction contrasts.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::learners::{fit_mlp, MlpConfig, MlpModel};
use crate::linalg::Matrix;
use crate::scalar::{real, Real};
use crate::stats;
use crate::tabular::Dataset;

use super::dml::derive_seed;
use super::{AteDiagnostics, AteEstimate, AteMethod, TreatmentSpec};

const TAG_SLEARNER: u64 = 0x500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SLearnerConfig<F: Real> {
    pub mlp: MlpConfig<F>,
    pub seed: u64,
}

impl<F: Real> Default for SLearnerConfig<F> {
    fn default() -> Self {
        SLearnerConfig {
            mlp: MlpConfig::wide_baseline(),
            seed: 0,
        }
    }
}

impl<F: Real> SLearnerConfig<F> {
    pub fn with_seed(seed: u64) -> Self {
        SLearnerConfig {
            seed,
            ..SLearnerConfig::default()
        }
    }
}

struct FittedSLearner<F: Real> {
    model: MlpModel<F>,
    t_mean: F,
    t_sd: F,
    y_mean: F,
    y_sd: F,
    /// Standardized covariate part of each training row (without T).
    x_rows: Vec<Vec<F>>,
    t_raw: Vec<F>,
}

fn fit_slearner<F: Real>(
    data: &Dataset<F>,
    spec: &TreatmentSpec<F>,
    config: &SLearnerConfig<F>,
) -> Result<FittedSLearner<F>> {
    spec.validate_against(data)?;
    let n = data.n_rows();

    let t_raw = data.column(data.require_col(&spec.parameter)?).to_vec();
    let y_raw = data.column(data.require_col(&spec.outcome)?);
    let t_mean = stats::mean(&t_raw);
    let t_sd = stats::std_dev(&t_raw).max(real(1e-30));
    let y_mean = stats::mean(y_raw);
    let y_sd = stats::std_dev(y_raw).max(real(1e-30));

    let mut cov_stats = Vec::new();
    let mut cov_cols = Vec::new();
    for name in &spec.covariates {
        let col = data.column(data.require_col(name)?);
        let m = stats::mean(col);
        let s = stats::std_dev(col).max(real(1e-30));
        cov_stats.push((m, s));
        cov_cols.push(col);
    }

    let mut rows = Vec::with_capacity(n);
    let mut x_rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(1 + cov_cols.len());
        row.push((t_raw[i] - t_mean) / t_sd);
        let mut xs = Vec::with_capacity(cov_cols.len());
        for (c, &(m, s)) in cov_cols.iter().zip(&cov_stats) {
            let v = (c[i] - m) / s;
            row.push(v);
            xs.push(v);
        }
        rows.push(row);
        x_rows.push(xs);
    }
    let x = Matrix::from_rows(rows);
    let y_std: Vec<F> = y_raw.iter().map(|&v| (v - y_mean) / y_sd).collect();

    let model = fit_mlp(&x, &y_std, &config.mlp, derive_seed(config.seed, TAG_SLEARNER))?;
    Ok(FittedSLearner {
        model,
        t_mean,
        t_sd,
        y_mean,
        y_sd,
        x_rows,
        t_raw,
    })
}

impl<F: Real> FittedSLearner<F> {
    /// Prediction in raw outcome units at raw treatment value `t` with the
    /// covariates of training row `i`.
    fn predict_at(&self, t: F, i: usize, buf: &mut Vec<F>) -> F {
        buf.clear();
        buf.push((t - self.t_mean) / self.t_sd);
        buf.extend_from_slice(&self.x_rows[i]);
        self.model.predict_row(buf) * self.y_sd + self.y_mean
    }
}

/// Baseline effect estimate: one network over `(T, X)`, ATE read as the mean
/// per-row contrast under the multiplicative perturbation
/// `t_i -> t_i (1 + delta)`.
pub fn slearner_ate<F: Real>(
    data: &Dataset<F>,
    spec: &TreatmentSpec<F>,
    config: &SLearnerConfig<F>,
) -> Result<AteEstimate<F>> {
    let fitted = fit_slearner(data, spec, config)?;
    let n = data.n_rows();
    let mut buf = Vec::new();
    let mut contrasts = Vec::with_capacity(n);
    for i in 0..n {
        let t = fitted.t_raw[i];
        let hi = fitted.predict_at(t * (F::one() + spec.delta), i, &mut buf);
        let lo = fitted.predict_at(t, i, &mut buf);
        contrasts.push(hi - lo);
    }
    let value = stats::mean(&contrasts);
    let se = stats::std_dev(&contrasts) / F::from_usize_lossy(n).sqrt();
    AteEstimate::new(
        value,
        se,
        AteMethod::Slearner,
        spec.clone(),
        AteDiagnostics {
            fold_count: None,
            convergence_flags: vec![],
            notes: vec![],
        },
    )
}

/// Interventional prediction from a fitted outcome model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct WhatIfResult<F: Real> {
    pub parameter: String,
    pub value: F,
    pub expected_outcome: F,
    /// Spread of the per-row predictions, not a standard error.
    pub prediction_sd: F,
    pub extrapolation_warning: bool,
    pub observed_range: (F, F),
}

/// Answers `E[Y | do(T = t_star)]` as the mean over rows of `f(t_star, x_i)`
/// with covariates held at their observed values. Queries far outside the
/// observed treatment range carry a non-fatal extrapolation warning.
pub fn whatif<F: Real>(
    data: &Dataset<F>,
    spec: &TreatmentSpec<F>,
    t_star: F,
    config: &SLearnerConfig<F>,
) -> Result<WhatIfResult<F>> {
    let fitted = fit_slearner(data, spec, config)?;
    let n = data.n_rows();
    let mut buf = Vec::new();
    let mut preds = Vec::with_capacity(n);
    for i in 0..n {
        preds.push(fitted.predict_at(t_star, i, &mut buf));
    }

    let lo = fitted
        .t_raw
        .iter()
        .copied()
        .fold(F::infinity(), F::min);
    let hi = fitted
        .t_raw
        .iter()
        .copied()
        .fold(F::neg_infinity(), F::max);
    let center = (lo + hi) / real(2.0);
    let half = (hi - lo) / real(2.0);
    let warn = (t_star - center).abs() > real::<F>(3.0) * half;

    Ok(WhatIfResult {
        parameter: spec.parameter.clone(),
        value: t_star,
        expected_outcome: stats::mean(&preds),
        prediction_sd: stats::std_dev(&preds),
        extrapolation_warning: warn,
        observed_range: (lo, hi),
    })
}
