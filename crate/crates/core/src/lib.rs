//! Causal analysis of circuit design-sweep tables: discover a causal DAG
//! from tabular sweep data, estimate how each design knob moves the
//! performance metrics (cross-fitted double machine learning against a
//! neural baseline), and answer what-if questions — with built-in
//! structural-causal-model oracles standing in for a simulator.
//!
//! All numeric kernels are generic over the scalar type via [`Real`]
//! (`f32` or `f64`); the aliases at the crate root fix `f64`, which is what
//! the CLI uses.

pub mod discovery;
pub mod effects;
pub mod error;
pub mod graph;
pub mod learners;
pub mod linalg;
pub mod scalar;
pub mod scm;
pub mod stats;
pub mod tabular;

pub use error::{Error, Result};
pub use graph::{AdjustmentReport, Dag};
pub use scalar::{real, Real};
pub use tabular::{ColumnRole, DropLog};

/// `f64` aliases for the main entry types.
pub type Dataset = tabular::Dataset<f64>;
pub type ScalingStats = tabular::ScalingStats<f64>;
pub type ScmModel = scm::ScmModel<f64>;
pub type SamplingPolicy = scm::SamplingPolicy<f64>;
pub type Intervention = scm::Intervention<f64>;
pub type TreatmentSpec = effects::TreatmentSpec<f64>;
pub type AteEstimate = effects::AteEstimate<f64>;
pub type MethodComparison = effects::MethodComparison<f64>;
pub type WhatIfResult = effects::WhatIfResult<f64>;
pub type LinearModel = learners::LinearModel<f64>;
pub type ForestModel = learners::ForestModel<f64>;
pub type MlpModel = learners::MlpModel<f64>;
pub type CiResult = discovery::CiResult<f64>;
pub type DiscoveryConfig = discovery::DiscoveryConfig<f64>;
pub type DiscoveryReport = discovery::DiscoveryReport<f64>;
