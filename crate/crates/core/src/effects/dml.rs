//! Cross-fitted double machine learning for the partially linear model
//! `Y = theta T + g(X) + e`: a forest residualizes the treatment, an MLP
//! residualizes the outcome, and an elastic net regresses residual on
//! residual over the pooled out-of-fold rows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{
    fit_elastic_net, fit_mlp, fit_random_forest, ElasticNetConfig, ForestConfig, ForestModel,
    MlpConfig, MlpModel, Regressor,
};
use crate::linalg::Matrix;
use crate::scalar::{real, Real};
use crate::stats;
use crate::tabular::Dataset;

use super::{AteDiagnostics, AteEstimate, AteMethod, TreatmentSpec};

/// Deterministic seed derivation (splitmix64 over master ^ tag).
pub(crate) fn derive_seed(master: u64, tag: u64) -> u64 {
    let mut z = master ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const TAG_FOLDS: u64 = 0x01;
const TAG_TREATMENT_MODEL: u64 = 0x100;
const TAG_OUTCOME_MODEL: u64 = 0x200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DmlConfig<F: Real> {
    pub folds: usize,
    pub seed: u64,
    /// Treatment model (x-model).
    pub forest: ForestConfig<F>,
    /// Outcome model (y-model).
    pub mlp: MlpConfig<F>,
    /// Final residual-on-residual stage (yx-model); fit without intercept.
    pub final_stage: ElasticNetConfig<F>,
}

impl<F: Real> Default for DmlConfig<F> {
    fn default() -> Self {
        DmlConfig {
            folds: 5,
            seed: 0,
            forest: ForestConfig::default(),
            mlp: MlpConfig::default(),
            final_stage: ElasticNetConfig {
                fit_intercept: false,
                tol: real(1e-10),
                max_iter: 10_000,
                ..ElasticNetConfig::default()
            },
        }
    }
}

impl<F: Real> DmlConfig<F> {
    pub fn with_seed(seed: u64) -> Self {
        DmlConfig {
            seed,
            ..DmlConfig::default()
        }
    }
}

/// Everything the cross-fitting produced. Residuals are in standardized
/// treatment/outcome units; `theta` is the slope converted back to raw
/// outcome-per-treatment units.
pub struct DmlFit<F: Real> {
    pub treatment_residuals: Vec<F>,
    pub outcome_residuals: Vec<F>,
    pub fold_assignment: Vec<usize>,
    pub treatment_models: Vec<Option<ForestModel<F>>>,
    pub outcome_models: Vec<Option<MlpModel<F>>>,
    pub theta: F,
    pub theta_se: F,
}

fn standardized_column<F: Real>(col: &[F]) -> Result<(Vec<F>, F, F)> {
    let m = stats::mean(col);
    let s = stats::std_dev(col);
    if !(s > F::zero()) || !s.is_finite() {
        return Err(Error::DegenerateData {
            columns: vec!["(constant column)".into()],
        });
    }
    Ok((col.iter().map(|&v| (v - m) / s).collect(), m, s))
}

/// Deterministic shuffled fold assignment: fold sizes differ by at most one.
fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let mut assignment = vec![0usize; n];
    let base = n / k;
    let extra = n % k;
    let mut at = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        for _ in 0..size {
            assignment[order[at]] = fold;
            at += 1;
        }
    }
    assignment
}

struct FoldModels<F: Real> {
    treatment: Option<ForestModel<F>>,
    outcome: Option<MlpModel<F>>,
    rows: Vec<usize>,
    t_hat: Vec<F>,
    y_hat: Vec<F>,
}

/// Estimates the ATE of `spec.parameter` on `spec.outcome` by cross-fitted
/// DML. The reported value converts the per-unit slope to the step
/// `theta * delta * t_ref`.
pub fn dml_ate<F: Real>(
    data: &Dataset<F>,
    spec: &TreatmentSpec<F>,
    config: &DmlConfig<F>,
) -> Result<(AteEstimate<F>, DmlFit<F>)> {
    spec.validate_against(data)?;
    let n = data.n_rows();
    let k = config.folds;
    if k < 2 {
        return Err(Error::Invariant("cross-fitting needs at least 2 folds".into()));
    }
    if n < 10 * k {
        return Err(Error::SampleSize {
            needed: 10 * k,
            actual: n,
        });
    }

    let t_col = data.column(data.require_col(&spec.parameter)?);
    let y_col = data.column(data.require_col(&spec.outcome)?);
    let (t_std, _, sd_t) = standardized_column(t_col).map_err(|_| {
        Error::UnidentifiableEffect(format!("treatment `{}` is constant", spec.parameter))
    })?;
    let (y_std, _, sd_y) = standardized_column(y_col).map_err(|_| {
        Error::UnidentifiableEffect(format!("outcome `{}` is constant", spec.outcome))
    })?;

    let mut x_cols: Vec<Vec<F>> = Vec::with_capacity(spec.covariates.len());
    for name in &spec.covariates {
        let col = data.column(data.require_col(name)?);
        let (std_col, _, _) = standardized_column(col).map_err(|_| Error::DegenerateData {
            columns: vec![name.clone()],
        })?;
        x_cols.push(std_col);
    }
    let p = x_cols.len();

    let assignment = fold_assignment(n, k, derive_seed(config.seed, TAG_FOLDS));

    let fold_results: Vec<Result<FoldModels<F>>> = (0..k)
        .into_par_iter()
        .map(|fold| {
            let train: Vec<usize> = (0..n).filter(|&i| assignment[i] != fold).collect();
            let test: Vec<usize> = (0..n).filter(|&i| assignment[i] == fold).collect();

            let gather = |rows: &[usize]| -> Matrix<F> {
                Matrix::from_rows(
                    rows.iter()
                        .map(|&i| x_cols.iter().map(|c| c[i]).collect())
                        .collect(),
                )
            };
            let t_train: Vec<F> = train.iter().map(|&i| t_std[i]).collect();
            let y_train: Vec<F> = train.iter().map(|&i| y_std[i]).collect();

            if p == 0 {
                // No covariates: the conditional means are plain means.
                let t_mean = stats::mean(&t_train);
                let y_mean = stats::mean(&y_train);
                return Ok(FoldModels {
                    treatment: None,
                    outcome: None,
                    t_hat: vec![t_mean; test.len()],
                    y_hat: vec![y_mean; test.len()],
                    rows: test,
                });
            }

            let x_train = gather(&train);
            let x_test = gather(&test);
            let m_model = fit_random_forest(
                &x_train,
                &t_train,
                &config.forest,
                derive_seed(config.seed, TAG_TREATMENT_MODEL + fold as u64),
            )?;
            let g_model = fit_mlp(
                &x_train,
                &y_train,
                &config.mlp,
                derive_seed(config.seed, TAG_OUTCOME_MODEL + fold as u64),
            )?;
            let t_hat = m_model.predict(&x_test)?;
            let y_hat = g_model.predict(&x_test)?;
            Ok(FoldModels {
                treatment: Some(m_model),
                outcome: Some(g_model),
                rows: test,
                t_hat,
                y_hat,
            })
        })
        .collect();

    let mut t_res = vec![F::zero(); n];
    let mut y_res = vec![F::zero(); n];
    let mut treatment_models = Vec::with_capacity(k);
    let mut outcome_models = Vec::with_capacity(k);
    for fr in fold_results {
        let fr = fr?;
        for (slot, &i) in fr.rows.iter().enumerate() {
            t_res[i] = t_std[i] - fr.t_hat[slot];
            y_res[i] = y_std[i] - fr.y_hat[slot];
        }
        treatment_models.push(fr.treatment);
        outcome_models.push(fr.outcome);
    }

    let sd_t_res = stats::std_dev(&t_res);
    if sd_t_res * sd_t_res < real(1e-12) {
        return Err(Error::UnidentifiableEffect(format!(
            "treatment `{}` is fully explained by its covariates",
            spec.parameter
        )));
    }
    let sd_y_res = stats::std_dev(&y_res);

    // Final stage on unit-scaled residuals so the tiny penalty stays tiny
    // relative to the data.
    let theta_units = if sd_y_res > F::zero() {
        let ts: Vec<F> = t_res.iter().map(|&v| v / sd_t_res).collect();
        let ys: Vec<F> = y_res.iter().map(|&v| v / sd_y_res).collect();
        let x = Matrix::from_columns(&[&ts]);
        let final_model = fit_elastic_net(&x, &ys, &config.final_stage)?;
        (
            final_model.coefficients[0] * sd_y_res / sd_t_res,
            final_model.converged,
        )
    } else {
        (F::zero(), true)
    };
    let (theta_std_units, final_converged) = theta_units;

    // Orthogonal-moment sandwich variance over the pooled residuals.
    let nf = F::from_usize_lossy(n);
    let j: F = t_res.iter().map(|&t| t * t).sum::<F>() / nf;
    let psi_sq: F = t_res
        .iter()
        .zip(&y_res)
        .map(|(&t, &y)| {
            let v = t * (y - theta_std_units * t);
            v * v
        })
        .sum::<F>()
        / nf;
    let se_std_units = (psi_sq / (j * j * nf)).sqrt();

    let theta_raw = theta_std_units * sd_y / sd_t;
    let se_raw = se_std_units * sd_y / sd_t;
    let ate = theta_raw * spec.delta * spec.t_ref;
    let se_ate = se_raw * (spec.delta * spec.t_ref).abs();

    let estimate = AteEstimate::new(
        ate,
        se_ate,
        AteMethod::Dml,
        spec.clone(),
        AteDiagnostics {
            fold_count: Some(k),
            convergence_flags: vec![final_converged],
            notes: vec![],
        },
    )?;
    let fit = DmlFit {
        treatment_residuals: t_res,
        outcome_residuals: y_res,
        fold_assignment: assignment,
        treatment_models,
        outcome_models,
        theta: theta_raw,
        theta_se: se_raw,
    };
    Ok((estimate, fit))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::tabular::ColumnRole;
    use rand_distr::{Distribution, StandardNormal};

    /// X ~ N(0,1), T = 1 + 0.8 X + N(0, 0.3), Y = theta T + 3 X + N(0, 0.1).
    pub(crate) fn confounded_linear_dataset(theta: f64, n: usize, seed: u64) -> Dataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::with_capacity(n);
        let mut t = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let xv: f64 = StandardNormal.sample(&mut rng);
            let tn: f64 = StandardNormal.sample(&mut rng);
            let yn: f64 = StandardNormal.sample(&mut rng);
            let tv = 1.0 + 0.8 * xv + 0.3 * tn;
            let yv = theta * tv + 3.0 * xv + 0.1 * yn;
            x.push(xv);
            t.push(tv);
            y.push(yv);
        }
        Dataset::new(
            vec!["T".into(), "X".into(), "Y".into()],
            vec![
                ColumnRole::Parameter,
                ColumnRole::Parameter,
                ColumnRole::Outcome,
            ],
            vec![t, x, y],
        )
        .unwrap()
    }

    fn quick_config(seed: u64) -> DmlConfig<f64> {
        DmlConfig {
            seed,
            forest: ForestConfig {
                n_trees: 60,
                ..ForestConfig::default()
            },
            mlp: MlpConfig {
                epochs: 60,
                ..MlpConfig::default()
            },
            ..DmlConfig::default()
        }
    }

    #[test]
    fn recovers_the_confounded_linear_slope() {
        let data = confounded_linear_dataset(2.0, 6_000, 42);
        let spec = TreatmentSpec::new("T", "Y", 1.0, 0.1, vec!["X".into()]).unwrap();
        let (est, fit) = dml_ate(&data, &spec, &quick_config(7)).unwrap();
        // ATE = theta * delta * t_ref = 0.2.
        assert!(
            (est.value - 0.2).abs() < 0.01,
            "ate {} should be near 0.2",
            est.value
        );
        assert!(est.std_error > 0.0);
        assert_eq!(fit.fold_assignment.len(), 6_000);
        assert!((fit.theta - 2.0).abs() < 0.1);
    }

    #[test]
    fn null_effect_stays_within_three_standard_errors() {
        let data = confounded_linear_dataset(0.0, 6_000, 9);
        let spec = TreatmentSpec::new("T", "Y", 1.0, 0.1, vec!["X".into()]).unwrap();
        let (est, _) = dml_ate(&data, &spec, &quick_config(3)).unwrap();
        assert!(
            est.value.abs() < 3.0 * est.std_error,
            "null ate {} exceeds 3 se {}",
            est.value,
            est.std_error
        );
    }

    #[test]
    fn ate_scales_linearly_in_delta() {
        let data = confounded_linear_dataset(2.0, 1_000, 4);
        let s1 = TreatmentSpec::new("T", "Y", 1.0, 0.1, vec!["X".into()]).unwrap();
        let s2 = TreatmentSpec::new("T", "Y", 1.0, 0.2, vec!["X".into()]).unwrap();
        let cfg = quick_config(5);
        let (e1, f1) = dml_ate(&data, &s1, &cfg).unwrap();
        let (e2, f2) = dml_ate(&data, &s2, &cfg).unwrap();
        assert_eq!(f1.theta, f2.theta);
        assert!((e2.value - 2.0 * e1.value).abs() < 1e-15);
    }

    #[test]
    fn affine_rescaling_of_covariates_leaves_theta_unchanged() {
        let data = confounded_linear_dataset(2.0, 1_000, 8);
        let mut scaled_cols: Vec<Vec<f64>> = (0..3).map(|j| data.column(j).to_vec()).collect();
        for v in scaled_cols[1].iter_mut() {
            *v = 10.0 * *v + 4.0;
        }
        let scaled = Dataset::new(
            data.names().to_vec(),
            data.roles().to_vec(),
            scaled_cols,
        )
        .unwrap();
        let spec = TreatmentSpec::new("T", "Y", 1.0, 0.1, vec!["X".into()]).unwrap();
        let cfg = quick_config(6);
        let (a, _) = dml_ate(&data, &spec, &cfg).unwrap();
        let (b, _) = dml_ate(&scaled, &spec, &cfg).unwrap();
        assert!(
            (a.value - b.value).abs() < 1e-8,
            "covariate rescaling moved the estimate: {} vs {}",
            a.value,
            b.value
        );
    }

    #[test]
    fn fully_explained_treatment_is_unidentifiable() {
        // T is an exact copy of X.
        let n = 400;
        let x: Vec<f64> = (0..n).map(|i| (i as f64 / 37.0).sin()).collect();
        let y: Vec<f64> = x.iter().map(|&v| 2.0 * v).collect();
        let data = Dataset::new(
            vec!["T".into(), "X".into(), "Y".into()],
            vec![
                ColumnRole::Parameter,
                ColumnRole::Parameter,
                ColumnRole::Outcome,
            ],
            vec![x.clone(), x, y],
        )
        .unwrap();
        let spec = TreatmentSpec::new("T", "Y", 1.0, 0.1, vec!["X".into()]).unwrap();
        let mut cfg = quick_config(1);
        // Memorizing forests make the residual variance collapse.
        cfg.forest = ForestConfig {
            n_trees: 20,
            max_depth: None,
            min_leaf: 1,
            feature_fraction: 1.0,
            bootstrap: false,
        };
        let err = dml_ate(&data, &spec, &cfg).unwrap_err();
        assert_eq!(err.category(), "unidentifiable-effect");
    }

    #[test]
    fn preconditions_are_enforced() {
        let data = confounded_linear_dataset(1.0, 60, 2);
        let spec = TreatmentSpec::new("T", "Y", 1.0, 0.1, vec!["X".into()]).unwrap();
        let mut cfg = quick_config(1);
        cfg.folds = 1;
        assert!(dml_ate(&data, &spec, &cfg).is_err());
        let cfg = quick_config(1);
        // 60 rows < 10 * 5 folds.
        assert_eq!(
            dml_ate(&data, &spec, &cfg).unwrap_err().category(),
            "sample-size"
        );
    }
}
