//! First-order square-law op-amp models used as the built-in ground truth.
//!
//! Process constants are plausible 65nm-class magnitudes; the models, not any
//! external table, define ground truth for the estimators. Gains are in dB.

use crate::error::{Error, Result};
use crate::scalar::{real, Real};
use crate::tabular::ColumnRole;

use super::{PolicyParam, SamplingPolicy, ScmModel, ScmNode};

pub const KP_N: f64 = 200e-6;
pub const KP_P: f64 = 100e-6;
pub const VA_PRIME: f64 = 2e7;
pub const V_THN: f64 = 0.4;
pub const V_THP: f64 = 0.4;
pub const V_DD: f64 = 1.2;
pub const V_CM_IN: f64 = 0.6;

pub const IDC0: f64 = 20e-6;
pub const W0: f64 = 2e-6;
pub const L0: f64 = 120e-9;

/// Additive Gaussian noise scales: node voltages in volts, gain in dB.
pub const NOISE_NODE_V: f64 = 5e-3;
pub const NOISE_GAIN_DB: f64 = 0.2;

/// Exponent attenuating how strongly the reconstructed differential-pair
/// overdrive (read back from the noisy tail-node voltage) shifts the gain.
/// At zero noise the reconstruction is exact and the exponent drops out.
pub const MEDIATION_EXP: f64 = 0.3;

/// Floor for reconstructed overdrive voltages; keeps the gain total under
/// extreme noise tails.
const V_OV_FLOOR: f64 = 1e-3;

pub const DEFAULT_SPREAD: f64 = 0.25;
pub const DEFAULT_RHO: f64 = 0.9;

fn gm(kp: f64, w: f64, l: f64, id: f64) -> f64 {
    (2.0 * kp * (w / l) * id).sqrt()
}

fn r_out(l: f64, id: f64) -> f64 {
    VA_PRIME * l / id
}

fn v_ov(kp: f64, w: f64, l: f64, id: f64) -> f64 {
    (2.0 * id / (kp * (w / l))).sqrt()
}

fn parallel(a: f64, b: f64) -> f64 {
    a * b / (a + b)
}

fn db(x: f64) -> f64 {
    20.0 * x.log10()
}

fn param_node<F: Real>(name: &str) -> ScmNode<F> {
    ScmNode {
        name: name.to_string(),
        role: ColumnRole::Parameter,
        parents: vec![],
        func: Box::new(|_, _| F::zero()),
        noise_scale: F::zero(),
    }
}

/// Current-mirror OTA. Parameters `{Idc, W_DP, W_PMOS, W_CM, L}` feed two
/// intermediate node voltages (`diff_s_v`, `diff_d_v`), which in turn drive
/// `AC_Gain` together with the direct parameter dependencies:
///
/// - branch current `I_d = (Idc/2) * (W_CM/W0)`
/// - `diff_s_v = V_cm_in - (V_thn + V_ov(W_DP, L, I_d)) + noise`
/// - `diff_d_v = V_dd - (V_thp + V_ov(W_PMOS, L, I_d)) + noise`
/// - `AC_Gain = 20 log10(gm(W_DP, L, I_d) * (r_on || r_op) * (W_PMOS/W0)^0.1) + noise`,
///   where the differential-pair overdrive and the load width are read back
///   from the two node voltages, making both intermediates causal mediators.
pub fn ota_current_mirror<F: Real>() -> ScmModel<F> {
    let nodes = vec![
        param_node("Idc"),
        param_node("W_DP"),
        param_node("W_PMOS"),
        param_node("W_CM"),
        param_node("L"),
        ScmNode {
            name: "diff_s_v".into(),
            role: ColumnRole::Intermediate,
            // parents: Idc, W_DP, W_CM, L
            parents: vec![0, 1, 3, 4],
            func: Box::new(|p: &[F], e: F| {
                let (idc, w_dp, w_cm, l) = (
                    p[0].to_f64_lossy(),
                    p[1].to_f64_lossy(),
                    p[2].to_f64_lossy(),
                    p[3].to_f64_lossy(),
                );
                let id = idc / 2.0 * (w_cm / W0);
                real::<F>(V_CM_IN - (V_THN + v_ov(KP_N, w_dp, l, id))) + e
            }),
            noise_scale: real(NOISE_NODE_V),
        },
        ScmNode {
            name: "diff_d_v".into(),
            role: ColumnRole::Intermediate,
            // parents: Idc, W_PMOS, W_CM, L
            parents: vec![0, 2, 3, 4],
            func: Box::new(|p: &[F], e: F| {
                let (idc, w_pmos, w_cm, l) = (
                    p[0].to_f64_lossy(),
                    p[1].to_f64_lossy(),
                    p[2].to_f64_lossy(),
                    p[3].to_f64_lossy(),
                );
                let id = idc / 2.0 * (w_cm / W0);
                real::<F>(V_DD - (V_THP + v_ov(KP_P, w_pmos, l, id))) + e
            }),
            noise_scale: real(NOISE_NODE_V),
        },
        ScmNode {
            name: "AC_Gain".into(),
            role: ColumnRole::Outcome,
            // parents: Idc, W_DP, W_CM, L, diff_s_v, diff_d_v
            parents: vec![0, 1, 3, 4, 5, 6],
            func: Box::new(|p: &[F], e: F| {
                let (idc, w_dp, w_cm, l) = (
                    p[0].to_f64_lossy(),
                    p[1].to_f64_lossy(),
                    p[2].to_f64_lossy(),
                    p[3].to_f64_lossy(),
                );
                let (diff_s, diff_d) = (p[4].to_f64_lossy(), p[5].to_f64_lossy());
                let id = idc / 2.0 * (w_cm / W0);

                // Differential-pair transconductance, with the overdrive read
                // back from the (noisy) tail node voltage.
                let ov_ideal = v_ov(KP_N, w_dp, l, id);
                let ov_eff = (V_CM_IN - V_THN - diff_s).max(V_OV_FLOOR);
                let gm_dp = gm(KP_N, w_dp, l, id) * (ov_ideal / ov_eff).powf(MEDIATION_EXP);

                // Load width read back from the load drain voltage.
                let ov_p_eff = (V_DD - V_THP - diff_d).max(V_OV_FLOOR);
                let w_load_eff = 2.0 * id * l / (KP_P * ov_p_eff * ov_p_eff);

                let r = r_out(l, id);
                let gain = db(gm_dp * parallel(r, r) * (w_load_eff / W0).powf(0.1));
                real::<F>(gain) + e
            }),
            noise_scale: real(NOISE_GAIN_DB),
        },
    ];
    ScmModel::new("ota", nodes).expect("static model construction is valid")
}

/// Telescopic op amp: cascode devices sized from `W_PMOS` and `W_CM`,
/// branch current `Idc/2`.
///
/// `AC_Gain = 20 log10(gm_DP * ((gm_casc r_o^2) || (gm_p r_o^2)))`.
pub fn telescopic<F: Real>() -> ScmModel<F> {
    let nodes = vec![
        param_node("Idc"),
        param_node("W_DP"),
        param_node("W_PMOS"),
        param_node("W_CM"),
        param_node("L"),
        ScmNode {
            name: "AC_Gain".into(),
            role: ColumnRole::Outcome,
            parents: vec![0, 1, 2, 3, 4],
            func: Box::new(|p: &[F], e: F| {
                let (idc, w_dp, w_pmos, w_cm, l) = (
                    p[0].to_f64_lossy(),
                    p[1].to_f64_lossy(),
                    p[2].to_f64_lossy(),
                    p[3].to_f64_lossy(),
                    p[4].to_f64_lossy(),
                );
                let id = idc / 2.0;
                let r = r_out(l, id);
                let r_down = gm(KP_N, w_cm, l, id) * r * r;
                let r_up = gm(KP_P, w_pmos, l, id) * r * r;
                let gain = db(gm(KP_N, w_dp, l, id) * parallel(r_up, r_down));
                real::<F>(gain) + e
            }),
            noise_scale: real(NOISE_GAIN_DB),
        },
    ];
    ScmModel::new("telescopic", nodes).expect("static model construction is valid")
}

/// Folded-cascode op amp: the folding branch carries
/// `I_fold = (Idc/2) * (W_NML/W0)`, and both cascode branches run at the
/// folded current.
pub fn folded_cascode<F: Real>() -> ScmModel<F> {
    let nodes = vec![
        param_node("Idc"),
        param_node("W_DP"),
        param_node("W_PMOS"),
        param_node("W_NML"),
        param_node("L"),
        ScmNode {
            name: "AC_Gain".into(),
            role: ColumnRole::Outcome,
            parents: vec![0, 1, 2, 3, 4],
            func: Box::new(|p: &[F], e: F| {
                let (idc, w_dp, w_pmos, w_nml, l) = (
                    p[0].to_f64_lossy(),
                    p[1].to_f64_lossy(),
                    p[2].to_f64_lossy(),
                    p[3].to_f64_lossy(),
                    p[4].to_f64_lossy(),
                );
                let id = idc / 2.0;
                let i_fold = id * (w_nml / W0);
                let r = r_out(l, i_fold);
                let r_up = gm(KP_P, w_pmos, l, i_fold) * r * r;
                let r_down = gm(KP_N, w_nml, l, i_fold) * r * r;
                let gain = db(gm(KP_N, w_dp, l, id) * parallel(r_up, r_down));
                real::<F>(gain) + e
            }),
            noise_scale: real(NOISE_GAIN_DB),
        },
    ];
    ScmModel::new("folded", nodes).expect("static model construction is valid")
}

/// Builds the named circuit model: `ota`, `telescopic`, or `folded`.
pub fn model_by_name<F: Real>(name: &str) -> Result<ScmModel<F>> {
    match name {
        "ota" => Ok(ota_current_mirror()),
        "telescopic" => Ok(telescopic()),
        "folded" => Ok(folded_cascode()),
        other => Err(Error::UnknownNode(format!(
            "unknown circuit model `{other}` (expected ota, telescopic, or folded)"
        ))),
    }
}

/// Default sweep size per circuit.
pub fn default_sample_count(name: &str) -> Result<usize> {
    match name {
        "ota" | "telescopic" => Ok(20_000),
        "folded" => Ok(38_000),
        other => Err(Error::UnknownNode(format!("unknown circuit model `{other}`"))),
    }
}

fn nominal_for(param: &str) -> f64 {
    match param {
        "Idc" => IDC0,
        "L" => L0,
        _ => W0,
    }
}

/// Log-uniform policy around the nominal sizing with the given spread and
/// confounding strength.
pub fn default_policy<F: Real>(model: &ScmModel<F>, spread: F, rho: F) -> Result<SamplingPolicy<F>> {
    let params = model
        .parameter_indices()
        .into_iter()
        .map(|i| {
            let name = model.node(i).name.clone();
            let nominal = real(nominal_for(&name));
            PolicyParam {
                name,
                nominal,
                spread,
            }
        })
        .collect();
    SamplingPolicy::new(params, rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effects::TreatmentSpec;
    use crate::scm::{oracle_ate, sample_observational, Intervention, sample_interventional};
    use crate::stats;

    fn zero_noise_ota() -> ScmModel<f64> {
        let mut m = ota_current_mirror::<f64>();
        for n in &mut m.nodes {
            n.noise_scale = 0.0;
        }
        m
    }

    fn nominal_policy(spread: f64, rho: f64) -> SamplingPolicy<f64> {
        default_policy(&ota_current_mirror::<f64>(), spread, rho).unwrap()
    }

    #[test]
    fn ota_structure_matches_expectations() {
        let m = ota_current_mirror::<f64>();
        assert_eq!(m.len(), 8);
        assert_eq!(m.parameter_indices().len(), 5);
        let gain = m.node_index("AC_Gain").unwrap();
        // Sinks: nothing lists AC_Gain as a parent.
        for i in 0..m.len() {
            assert!(!m.node(i).parents.contains(&gain));
        }
        // Both intermediates mediate into the gain.
        let s = m.node_index("diff_s_v").unwrap();
        let d = m.node_index("diff_d_v").unwrap();
        assert!(m.node(gain).parents.contains(&s));
        assert!(m.node(gain).parents.contains(&d));
    }

    #[test]
    fn zero_noise_nominal_gain_is_deterministic() {
        let m = zero_noise_ota();
        let policy = nominal_policy(0.0, 0.0);
        let a = sample_observational(&m, &policy, 3, 1).unwrap();
        let b = sample_observational(&m, &policy, 3, 99).unwrap();
        let g = a.column(a.col_index("AC_Gain").unwrap())[0];
        assert!(a.column(a.col_index("AC_Gain").unwrap()).iter().all(|&x| x == g));
        assert_eq!(g, b.column(b.col_index("AC_Gain").unwrap())[0]);
        // Hand-computed: gm = 2.582e-4 S, r/2 = 1.2e5 ohm, load term 1.
        let expect = 20.0 * (2.0f64 * KP_N * (W0 / L0) * 1e-5).sqrt().log10()
            + 20.0 * (VA_PRIME * L0 / 1e-5 / 2.0).log10();
        assert!((g - expect).abs() < 1e-9, "gain {g} vs {expect}");
    }

    #[test]
    fn zero_noise_gain_is_monotone_in_idc_and_w_dp() {
        let m = zero_noise_ota();
        let policy = nominal_policy(0.0, 0.0);
        let gain_at = |name: &str, value: f64| -> f64 {
            let d = sample_interventional(&m, &policy, &Intervention::single(name, value), 1, 0)
                .unwrap();
            d.column(d.col_index("AC_Gain").unwrap())[0]
        };
        // Grid over the policy sampling range e^[-0.25, 0.25].
        let grid = |nom: f64| -> Vec<f64> {
            (0..9)
                .map(|i| nom * (-0.25 + 0.0625 * i as f64).exp())
                .collect()
        };
        let mut last = f64::INFINITY;
        for idc in grid(IDC0) {
            let g = gain_at("Idc", idc);
            assert!(g < last, "gain must fall as Idc rises");
            last = g;
        }
        let mut last = f64::NEG_INFINITY;
        for w in grid(W0) {
            let g = gain_at("W_DP", w);
            assert!(g > last, "gain must rise with W_DP");
            last = g;
        }
    }

    #[test]
    fn ota_oracle_sign_pattern() {
        let m = ota_current_mirror::<f64>();
        let policy = nominal_policy(DEFAULT_SPREAD, DEFAULT_RHO);
        let expected = [
            ("Idc", -1.0),
            ("W_DP", 1.0),
            ("W_PMOS", 1.0),
            ("W_CM", -1.0),
            ("L", 1.0),
        ];
        for (param, sign) in expected {
            let t_ref = nominal_for(param);
            let spec = TreatmentSpec::new(param, "AC_Gain", t_ref, 0.1, vec![]).unwrap();
            let est = oracle_ate(&m, &policy, &spec, 4_000, 7).unwrap();
            assert!(
                est.value * sign > 0.0,
                "{param}: oracle ATE {} should have sign {sign}",
                est.value
            );
        }
    }

    #[test]
    fn rho_zero_gives_uncorrelated_parameters() {
        let m = ota_current_mirror::<f64>();
        let policy = nominal_policy(DEFAULT_SPREAD, 0.0);
        let d = sample_observational(&m, &policy, 20_000, 7).unwrap();
        let params = d.parameter_indices();
        for (ai, &a) in params.iter().enumerate() {
            for &b in &params[ai + 1..] {
                let ca = d.column(a);
                let cb = d.column(b);
                let (ma, mb) = (stats::mean(ca), stats::mean(cb));
                let cov: f64 = ca
                    .iter()
                    .zip(cb)
                    .map(|(&x, &y)| (x - ma) * (y - mb))
                    .sum::<f64>()
                    / ca.len() as f64;
                let corr = cov / (stats::std_dev(ca) * stats::std_dev(cb));
                assert!(
                    corr.abs() < 0.05,
                    "parameters {a} and {b} correlate at {corr}"
                );
            }
        }
    }

    #[test]
    fn intervention_leaves_non_descendants_untouched() {
        let m = ota_current_mirror::<f64>();
        let policy = nominal_policy(DEFAULT_SPREAD, DEFAULT_RHO);
        let lo = sample_interventional(
            &m,
            &policy,
            &Intervention::single("W_DP", W0),
            500,
            21,
        )
        .unwrap();
        let hi = sample_interventional(
            &m,
            &policy,
            &Intervention::single("W_DP", 1.1 * W0),
            500,
            21,
        )
        .unwrap();
        // Non-descendants of W_DP: every other parameter and diff_d_v.
        for name in ["Idc", "W_PMOS", "W_CM", "L", "diff_d_v"] {
            let j = lo.col_index(name).unwrap();
            assert_eq!(lo.column(j), hi.column(j), "{name} must not move");
        }
        // Descendants do move.
        for name in ["diff_s_v", "AC_Gain"] {
            let j = lo.col_index(name).unwrap();
            assert_ne!(lo.column(j), hi.column(j));
        }
    }

    #[test]
    fn oracle_se_scales_like_inverse_sqrt_n() {
        let m = ota_current_mirror::<f64>();
        let policy = nominal_policy(DEFAULT_SPREAD, DEFAULT_RHO);
        let spec = TreatmentSpec::new("Idc", "AC_Gain", IDC0, 0.1, vec![]).unwrap();
        let small = oracle_ate(&m, &policy, &spec, 2_000, 3).unwrap();
        let large = oracle_ate(&m, &policy, &spec, 8_000, 3).unwrap();
        let ratio = large.std_error / small.std_error;
        assert!(
            (ratio - 0.5).abs() < 0.15,
            "quadrupling n should roughly halve the SE, got ratio {ratio}"
        );
    }

    #[test]
    fn telescopic_and_folded_models_sample_cleanly() {
        for name in ["telescopic", "folded"] {
            let m = model_by_name::<f64>(name).unwrap();
            assert_eq!(m.len(), 6);
            let policy = default_policy(&m, DEFAULT_SPREAD, DEFAULT_RHO).unwrap();
            let d = sample_observational(&m, &policy, 100, 1).unwrap();
            let g = d.column(d.col_index("AC_Gain").unwrap());
            assert!(g.iter().all(|v| v.is_finite()));
        }
        assert!(model_by_name::<f64>("nonsense").is_err());
        assert_eq!(default_sample_count("folded").unwrap(), 38_000);
    }
}
