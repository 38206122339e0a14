//! Treatment-effect estimation: cross-fitted double machine learning, the
//! single-model neural baseline, what-if prediction, and the comparison
//! arithmetic behind the ranked effect reports.

mod dml;
mod slearner;

pub use dml::{dml_ate, DmlConfig, DmlFit};
pub use slearner::{slearner_ate, whatif, SLearnerConfig, WhatIfResult};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{real, Real};
use crate::stats;
use crate::tabular::{ColumnRole, Dataset};

/// The intervention being measured: perturb `parameter` by the fraction
/// `delta` around `t_ref` and read the change in `outcome`, adjusting for
/// `covariates`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TreatmentSpec<F: Real> {
    pub parameter: String,
    pub outcome: String,
    pub t_ref: F,
    pub delta: F,
    pub covariates: Vec<String>,
}

impl<F: Real> TreatmentSpec<F> {
    pub fn new(
        parameter: impl Into<String>,
        outcome: impl Into<String>,
        t_ref: F,
        delta: F,
        covariates: Vec<String>,
    ) -> Result<Self> {
        let parameter = parameter.into();
        let outcome = outcome.into();
        if !(delta > real(-1.0)) {
            return Err(Error::Invariant(format!(
                "delta must be greater than -1, got {delta}"
            )));
        }
        if covariates.contains(&parameter) {
            return Err(Error::Invariant(
                "treatment parameter cannot be its own covariate".into(),
            ));
        }
        if covariates.contains(&outcome) {
            return Err(Error::Invariant("outcome cannot be a covariate".into()));
        }
        Ok(TreatmentSpec {
            parameter,
            outcome,
            t_ref,
            delta,
            covariates,
        })
    }

    /// Builds a spec against a dataset: `t_ref` defaults to the sample median
    /// of the treatment column.
    pub fn for_dataset(
        data: &Dataset<F>,
        parameter: &str,
        outcome: &str,
        delta: F,
        covariates: Vec<String>,
    ) -> Result<Self> {
        let t = data.require_col(parameter)?;
        data.require_col(outcome)?;
        if data.role(t) != ColumnRole::Parameter {
            return Err(Error::Role(format!(
                "treatment `{parameter}` must have role parameter, found {}",
                data.role(t).as_str()
            )));
        }
        let t_ref = stats::median(data.column(t));
        TreatmentSpec::new(parameter, outcome, t_ref, delta, covariates)
    }

    /// Validates column existence and roles against a concrete dataset.
    pub fn validate_against(&self, data: &Dataset<F>) -> Result<()> {
        let t = data.require_col(&self.parameter)?;
        data.require_col(&self.outcome)?;
        if data.role(t) != ColumnRole::Parameter {
            return Err(Error::Role(format!(
                "treatment `{}` must have role parameter",
                self.parameter
            )));
        }
        for c in &self.covariates {
            data.require_col(c)?;
        }
        Ok(())
    }
}

/// Who produced an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AteMethod {
    Oracle,
    Dml,
    Slearner,
}

impl AteMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            AteMethod::Oracle => "oracle",
            AteMethod::Dml => "dml",
            AteMethod::Slearner => "slearner",
        }
    }
}

/// Estimation diagnostics carried alongside each point estimate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AteDiagnostics {
    pub fold_count: Option<usize>,
    pub convergence_flags: Vec<bool>,
    pub notes: Vec<String>,
}

/// Point estimate of an average treatment effect, in outcome units per
/// `delta * t_ref` step of the treatment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AteEstimate<F: Real> {
    pub value: F,
    pub std_error: F,
    pub method: AteMethod,
    pub treatment: TreatmentSpec<F>,
    pub diagnostics: AteDiagnostics,
}

impl<F: Real> AteEstimate<F> {
    pub fn new(
        value: F,
        std_error: F,
        method: AteMethod,
        treatment: TreatmentSpec<F>,
        diagnostics: AteDiagnostics,
    ) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::NonFinite(format!(
                "{} estimate for `{}`",
                method.as_str(),
                treatment.parameter
            )));
        }
        if !(std_error >= F::zero()) {
            return Err(Error::Invariant("standard error must be >= 0".into()));
        }
        Ok(AteEstimate {
            value,
            std_error,
            method,
            treatment,
            diagnostics,
        })
    }
}

/// Signed percent difference of a model estimate from a reference value:
/// `100 * (reference - model) / |reference|`.
pub fn pct_diff<F: Real>(model_ate: F, ref_ate: F) -> Result<F> {
    if ref_ate == F::zero() {
        return Err(Error::UndefinedReference);
    }
    Ok(real::<F>(100.0) * (ref_ate - model_ate) / ref_ate.abs())
}

/// Mean of absolute percent differences (the summary row of the reports).
pub fn avg_abs<F: Real>(diffs: &[F]) -> Result<F> {
    if diffs.is_empty() {
        return Err(Error::EmptyInput("no percent differences to average".into()));
    }
    Ok(diffs.iter().map(|d| d.abs()).sum::<F>() / F::from_usize_lossy(diffs.len()))
}

/// Orders estimates by descending effect magnitude; ties break on parameter
/// name. All inputs are expected to share one outcome.
pub fn rank_effects<F: Real>(mut estimates: Vec<AteEstimate<F>>) -> Vec<AteEstimate<F>> {
    estimates.sort_by(|a, b| {
        b.value
            .abs()
            .partial_cmp(&a.value.abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.treatment.parameter.cmp(&b.treatment.parameter))
    });
    estimates
}

/// One output row for a single method against a reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EffectReportRow<F: Real> {
    pub parameter: String,
    pub reference_ate: F,
    pub model_ate: F,
    pub pct_diff: F,
    pub sign_flip: bool,
}

impl<F: Real> EffectReportRow<F> {
    pub fn new(parameter: impl Into<String>, reference_ate: F, model_ate: F) -> Result<Self> {
        let diff = pct_diff(model_ate, reference_ate)?;
        let sign_flip = reference_ate != F::zero()
            && model_ate != F::zero()
            && (reference_ate > F::zero()) != (model_ate > F::zero());
        Ok(EffectReportRow {
            parameter: parameter.into(),
            reference_ate,
            model_ate,
            pct_diff: diff,
            sign_flip,
        })
    }
}

/// Per-parameter comparison of both estimators against the reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ComparisonRow<F: Real> {
    pub parameter: String,
    pub oracle_ate: F,
    pub dml_ate: F,
    pub slearner_ate: F,
    pub pct_diff_dml: F,
    pub pct_diff_slearner: F,
    pub sign_flip_dml: bool,
    pub sign_flip_slearner: bool,
}

/// The full comparison table: one row per parameter plus the
/// average-of-absolute-values summary per method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MethodComparison<F: Real> {
    pub outcome: String,
    pub rows: Vec<ComparisonRow<F>>,
    pub avg_abs_dml: F,
    pub avg_abs_slearner: F,
}

/// Joins oracle, DML, and S-learner estimates by parameter name. Row order
/// follows the oracle list; the parameter sets must match exactly.
pub fn compare_methods<F: Real>(
    oracle: &[AteEstimate<F>],
    dml: &[AteEstimate<F>],
    slearner: &[AteEstimate<F>],
) -> Result<MethodComparison<F>> {
    if oracle.is_empty() {
        return Err(Error::EmptyInput("no oracle estimates".into()));
    }
    let outcome = oracle[0].treatment.outcome.clone();
    let find = |list: &[AteEstimate<F>], param: &str, label: &str| -> Result<F> {
        list.iter()
            .find(|e| e.treatment.parameter == param)
            .map(|e| e.value)
            .ok_or_else(|| Error::NamedColumn {
                name: param.to_string(),
                problem: format!("missing from the {label} estimates"),
            })
    };
    if dml.len() != oracle.len() || slearner.len() != oracle.len() {
        return Err(Error::Invariant(
            "method estimate lists cover different parameter sets".into(),
        ));
    }

    let mut rows = Vec::with_capacity(oracle.len());
    for o in oracle {
        let param = &o.treatment.parameter;
        let d = find(dml, param, "dml")?;
        let s = find(slearner, param, "slearner")?;
        let row_d = EffectReportRow::new(param.clone(), o.value, d)?;
        let row_s = EffectReportRow::new(param.clone(), o.value, s)?;
        rows.push(ComparisonRow {
            parameter: param.clone(),
            oracle_ate: o.value,
            dml_ate: d,
            slearner_ate: s,
            pct_diff_dml: row_d.pct_diff,
            pct_diff_slearner: row_s.pct_diff,
            sign_flip_dml: row_d.sign_flip,
            sign_flip_slearner: row_s.sign_flip,
        });
    }
    let avg_abs_dml = avg_abs(&rows.iter().map(|r| r.pct_diff_dml).collect::<Vec<_>>())?;
    let avg_abs_slearner = avg_abs(
        &rows
            .iter()
            .map(|r| r.pct_diff_slearner)
            .collect::<Vec<_>>(),
    )?;
    Ok(MethodComparison {
        outcome,
        rows,
        avg_abs_dml,
        avg_abs_slearner,
    })
}
