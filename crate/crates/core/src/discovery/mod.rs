//! Hybrid causal discovery: PC-style constraint-based skeleton with
//! Fisher-z tests, v-structure orientation plus Meek rules, then score-based
//! hill-climb refinement under BIC, all constrained by role tiers.

mod ci;
mod orient;
mod score;
mod skeleton;

pub use ci::{fisher_z_test, CiResult, CorrelationMatrix};
pub use orient::{consistent_extension, orient, EdgeOrigin, Pdag};
pub use score::{refine_score, Refinement};
pub use skeleton::{pc_skeleton, BackgroundKnowledge, RemovedEdge, Skeleton};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::scalar::{real, Real};
use crate::tabular::{standardize, ColumnRole, Dataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DiscoveryConfig<F: Real> {
    pub alpha: F,
    pub max_cond: usize,
    pub max_indegree: usize,
}

impl<F: Real> Default for DiscoveryConfig<F> {
    fn default() -> Self {
        DiscoveryConfig {
            alpha: real(0.01),
            max_cond: 3,
            max_indegree: 6,
        }
    }
}

/// Machine-readable record of one directed edge of the result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub from: String,
    pub to: String,
    /// How the orientation was decided.
    pub kind: EdgeOrigin,
}

/// Machine-readable record of one removed edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RemovedRecord<F: Real> {
    pub i: String,
    pub j: String,
    pub sepset: Vec<String>,
    pub p_value: F,
}

/// Everything the pipeline produced besides the graph itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DiscoveryReport<F: Real> {
    pub nodes: Vec<(String, ColumnRole)>,
    pub edges: Vec<EdgeRecord>,
    pub removed: Vec<RemovedRecord<F>>,
    pub score_trajectory: Vec<F>,
    pub alpha: F,
    pub max_cond: usize,
    pub max_indegree: usize,
}

/// Full pipeline: standardize, PC skeleton, orientation, BIC refinement.
/// Deterministic for a given dataset and configuration; the returned DAG is
/// always acyclic and tier-consistent.
pub fn discover<F: Real>(
    data: &Dataset<F>,
    config: &DiscoveryConfig<F>,
) -> Result<(Dag, DiscoveryReport<F>)> {
    if !(config.alpha > F::zero() && config.alpha < F::one()) {
        return Err(Error::Invariant(format!(
            "alpha must lie strictly between 0 and 1, got {}",
            config.alpha
        )));
    }
    if data.parameter_indices().is_empty() {
        return Err(Error::Role("analysis needs at least one parameter column".into()));
    }
    if data.outcome_indices().is_empty() {
        return Err(Error::Role("analysis needs at least one outcome column".into()));
    }
    if data.has_missing() {
        return Err(Error::Invariant(
            "dataset still contains missing markers; run preprocess first".into(),
        ));
    }

    let (std_data, _) = standardize(data)?;
    let bk = BackgroundKnowledge::from_roles(std_data.roles());
    let (skeleton, removed) = pc_skeleton(&std_data, config.alpha, &bk, config.max_cond)?;
    let pdag = orient(&skeleton, &bk)?;
    let refinement = refine_score(&std_data, &pdag, &skeleton, &bk, config.max_indegree)?;

    let dag = Dag::new(
        data.names().to_vec(),
        data.roles().to_vec(),
        &refinement
            .edges
            .iter()
            .map(|&(a, b, _)| (a, b))
            .collect::<Vec<_>>(),
    )?;

    // Validators: the result must respect the tier ordering.
    for (from, to) in dag.edges() {
        if !bk.edge_allowed(from, to) {
            return Err(Error::Invariant(format!(
                "refinement produced the tier-forbidden edge {} -> {}",
                dag.name(from),
                dag.name(to)
            )));
        }
    }

    let name_of = |v: usize| data.name(v).to_string();
    let report = DiscoveryReport {
        nodes: data
            .names()
            .iter()
            .cloned()
            .zip(data.roles().iter().copied())
            .collect(),
        edges: refinement
            .edges
            .iter()
            .map(|&(a, b, kind)| EdgeRecord {
                from: name_of(a),
                to: name_of(b),
                kind,
            })
            .collect(),
        removed: removed
            .iter()
            .map(|r| RemovedRecord {
                i: name_of(r.i),
                j: name_of(r.j),
                sepset: r.sepset.iter().map(|&v| name_of(v)).collect(),
                p_value: r.p_value,
            })
            .collect(),
        score_trajectory: refinement.score_trajectory,
        alpha: config.alpha,
        max_cond: config.max_cond,
        max_indegree: config.max_indegree,
    };
    Ok((dag, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn independent_data(n: usize, seed: u64) -> Dataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        Dataset::new(
            vec!["a".into(), "b".into(), "c".into(), "g".into()],
            vec![
                ColumnRole::Parameter,
                ColumnRole::Parameter,
                ColumnRole::Parameter,
                ColumnRole::Outcome,
            ],
            cols,
        )
        .unwrap()
    }

    #[test]
    fn independent_columns_give_an_edgeless_dag() {
        let data = independent_data(20_000, 5);
        let (dag, report) = discover(&data, &DiscoveryConfig::default()).unwrap();
        assert!(dag.edges().is_empty());
        assert!(report.edges.is_empty());
        assert_eq!(report.removed.len(), 6);
    }

    #[test]
    fn discovery_is_deterministic() {
        let data = independent_data(5_000, 6);
        let cfg = DiscoveryConfig::default();
        let (dag_a, rep_a) = discover(&data, &cfg).unwrap();
        let (dag_b, rep_b) = discover(&data, &cfg).unwrap();
        assert_eq!(dag_a, dag_b);
        assert_eq!(
            serde_json::to_string(&rep_a).unwrap(),
            serde_json::to_string(&rep_b).unwrap()
        );
    }

    #[test]
    fn alpha_bounds_are_enforced() {
        let data = independent_data(100, 7);
        let cfg = DiscoveryConfig {
            alpha: 1.5,
            ..DiscoveryConfig::default()
        };
        assert!(discover(&data, &cfg).is_err());
    }
}
