//! Error type shared by every module. The CLI prints these as
//! `error:<category>:<detail>`, so each variant maps to a stable category.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column `{name}` {problem}")]
    NamedColumn { name: String, problem: String },

    #[error("cell at row {row}, column `{column}` is not numeric: `{cell}`")]
    Parse {
        row: usize,
        column: String,
        cell: String,
    },

    #[error("{0}")]
    Format(String),

    #[error("dataset is empty: {0}")]
    EmptyDataset(String),

    #[error("role constraint violated: {0}")]
    Role(String),

    #[error("degenerate data: columns {} are collinear or constant", columns.join(", "))]
    DegenerateData { columns: Vec<String> },

    #[error("sample size {actual} too small: need more than {needed}")]
    SampleSize { needed: usize, actual: usize },

    #[error("conflicting orientations among edges: {}", edges.join(", "))]
    OrientationConflict { edges: Vec<String> },

    #[error("graph contains a cycle through: {}", nodes.join(" -> "))]
    Cycle { nodes: Vec<String> },

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("role inconsistency: {0}")]
    RoleInconsistency(String),

    #[error("effect is not identifiable: {0}")]
    UnidentifiableEffect(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    TrainingDivergence { epoch: usize },

    #[error("dimension mismatch: expected {expected} features, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("percent difference is undefined for a zero reference value")]
    UndefinedReference,

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-grepable category for CLI error lines.
    pub fn category(&self) -> &'static str {
        match self {
            Error::NamedColumn { .. } => "named-column",
            Error::Parse { .. } => "parse",
            Error::Format(_) => "format",
            Error::EmptyDataset(_) => "empty-dataset",
            Error::Role(_) => "role",
            Error::DegenerateData { .. } => "degenerate-data",
            Error::SampleSize { .. } => "sample-size",
            Error::OrientationConflict { .. } => "orientation-conflict",
            Error::Cycle { .. } => "acyclicity",
            Error::UnknownNode(_) => "unknown-node",
            Error::RoleInconsistency(_) => "role-inconsistency",
            Error::UnidentifiableEffect(_) => "unidentifiable-effect",
            Error::TrainingDivergence { .. } => "training-divergence",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::UndefinedReference => "undefined-reference",
            Error::EmptyInput(_) => "empty-input",
            Error::NonFinite(_) => "data",
            Error::Invariant(_) => "internal",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
