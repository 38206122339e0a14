//! Data model for sweep tables: column roles, the immutable [`Dataset`],
//! preprocessing (missing rows, ignored columns, constant columns), and
//! standardization with invertible [`ScalingStats`].

mod csvio;

pub use csvio::{load_csv, parse_manifest, write_csv, write_manifest};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{real, Real};
use crate::stats;

/// Role of a table column in the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Parameter,
    Intermediate,
    Outcome,
    Ignore,
}

impl ColumnRole {
    /// Exact, case-sensitive parse of the manifest spelling.
    pub fn parse(s: &str) -> Option<ColumnRole> {
        match s {
            "parameter" => Some(ColumnRole::Parameter),
            "intermediate" => Some(ColumnRole::Intermediate),
            "outcome" => Some(ColumnRole::Outcome),
            "ignore" => Some(ColumnRole::Ignore),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ColumnRole::Parameter => "parameter",
            ColumnRole::Intermediate => "intermediate",
            ColumnRole::Outcome => "outcome",
            ColumnRole::Ignore => "ignore",
        }
    }
}

/// Column-labeled numeric table. Immutable after construction; missing cells
/// are NaN markers and are only legal before [`preprocess`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Dataset<F: Real> {
    names: Vec<String>,
    roles: Vec<ColumnRole>,
    columns: Vec<Vec<F>>,
}

impl<F: Real> Dataset<F> {
    pub fn new(names: Vec<String>, roles: Vec<ColumnRole>, columns: Vec<Vec<F>>) -> Result<Self> {
        if names.len() != roles.len() || names.len() != columns.len() {
            return Err(Error::Invariant(
                "names, roles and columns must have equal length".into(),
            ));
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(Error::NamedColumn {
                    name: a.clone(),
                    problem: "appears more than once".into(),
                });
            }
        }
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::Invariant("ragged columns".into()));
        }
        Ok(Dataset {
            names,
            roles,
            columns,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn roles(&self) -> &[ColumnRole] {
        &self.roles
    }

    pub fn name(&self, j: usize) -> &str {
        &self.names[j]
    }

    pub fn role(&self, j: usize) -> ColumnRole {
        self.roles[j]
    }

    pub fn column(&self, j: usize) -> &[F] {
        &self.columns[j]
    }

    /// Exact, case-sensitive column lookup.
    pub fn col_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn require_col(&self, name: &str) -> Result<usize> {
        self.col_index(name).ok_or_else(|| Error::NamedColumn {
            name: name.to_string(),
            problem: "not present in the dataset".into(),
        })
    }

    pub fn indices_with_role(&self, role: ColumnRole) -> Vec<usize> {
        (0..self.n_cols()).filter(|&j| self.roles[j] == role).collect()
    }

    pub fn parameter_indices(&self) -> Vec<usize> {
        self.indices_with_role(ColumnRole::Parameter)
    }

    pub fn outcome_indices(&self) -> Vec<usize> {
        self.indices_with_role(ColumnRole::Outcome)
    }

    pub fn has_missing(&self) -> bool {
        self.columns.iter().any(|c| c.iter().any(|v| v.is_nan()))
    }
}

/// One entry of the preprocessing drop log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DropEvent {
    Row { index: usize, reason: String },
    Col { name: String, reason: String },
}

/// Preprocessing drop log; renders to the line format
/// `dropped_row,<index>,<reason>` / `dropped_col,<name>,<reason>`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropLog {
    pub events: Vec<DropEvent>,
}

impl DropLog {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            match e {
                DropEvent::Row { index, reason } => {
                    out.push_str(&format!("dropped_row,{index},{reason}\n"));
                }
                DropEvent::Col { name, reason } => {
                    out.push_str(&format!("dropped_col,{name},{reason}\n"));
                }
            }
        }
        out
    }

    pub fn dropped_col_names(&self) -> Vec<&str> {
        self.events
            .iter()
            .filter_map(|e| match e {
                DropEvent::Col { name, .. } => Some(name.as_str()),
                _ => None,
            })
            .collect()
    }
}

/// Cleans a loaded table: drops rows with a missing value in any retained
/// column, drops `ignore` columns, and (optionally) drops constant columns.
/// Row order is preserved; logged row indices refer to the input ordering.
pub fn preprocess<F: Real>(data: &Dataset<F>, drop_constant: bool) -> Result<(Dataset<F>, DropLog)> {
    let mut log = DropLog::default();

    let retained: Vec<usize> = (0..data.n_cols())
        .filter(|&j| data.role(j) != ColumnRole::Ignore)
        .collect();
    for j in 0..data.n_cols() {
        if data.role(j) == ColumnRole::Ignore {
            log.events.push(DropEvent::Col {
                name: data.name(j).to_string(),
                reason: "role_ignore".into(),
            });
        }
    }

    // A missing cell in any retained column drops the whole row; downstream
    // tests and learners need complete cases.
    let mut keep_rows = Vec::with_capacity(data.n_rows());
    'rows: for i in 0..data.n_rows() {
        for &j in &retained {
            if data.column(j)[i].is_nan() {
                log.events.push(DropEvent::Row {
                    index: i,
                    reason: format!("missing:{}", data.name(j)),
                });
                continue 'rows;
            }
        }
        keep_rows.push(i);
    }
    if keep_rows.is_empty() {
        return Err(Error::EmptyDataset(
            "every row had a missing value in a retained column".into(),
        ));
    }

    let mut names = Vec::new();
    let mut roles = Vec::new();
    let mut columns = Vec::new();
    for &j in &retained {
        let src = data.column(j);
        let col: Vec<F> = keep_rows.iter().map(|&i| src[i]).collect();
        if drop_constant && col.iter().all(|&v| v == col[0]) {
            log.events.push(DropEvent::Col {
                name: data.name(j).to_string(),
                reason: "constant".into(),
            });
            continue;
        }
        names.push(data.name(j).to_string());
        roles.push(data.role(j));
        columns.push(col);
    }

    if !roles.contains(&ColumnRole::Outcome) {
        return Err(Error::Role(
            "no outcome column survived preprocessing".into(),
        ));
    }
    if columns.len() < 2 {
        return Err(Error::Role(
            "fewer than two columns survived preprocessing".into(),
        ));
    }

    Ok((Dataset::new(names, roles, columns)?, log))
}

/// Per-column location/scale recorded by [`standardize`]; maps standardized
/// quantities back to original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ScalingStats<F: Real> {
    pub names: Vec<String>,
    pub means: Vec<F>,
    pub stds: Vec<F>,
}

impl<F: Real> ScalingStats<F> {
    pub fn for_column(&self, name: &str) -> Option<(F, F)> {
        let j = self.names.iter().position(|n| n == name)?;
        Some((self.means[j], self.stds[j]))
    }

    /// Inverse transform of a standardized dataset.
    pub fn unscale(&self, data: &Dataset<F>) -> Result<Dataset<F>> {
        if data.names() != self.names.as_slice() {
            return Err(Error::Invariant(
                "scaling stats do not match dataset columns".into(),
            ));
        }
        let columns = (0..data.n_cols())
            .map(|j| {
                data.column(j)
                    .iter()
                    .map(|&v| v * self.stds[j] + self.means[j])
                    .collect()
            })
            .collect();
        Dataset::new(data.names().to_vec(), data.roles().to_vec(), columns)
    }
}

/// Rescales every column to mean 0, population standard deviation 1.
pub fn standardize<F: Real>(data: &Dataset<F>) -> Result<(Dataset<F>, ScalingStats<F>)> {
    let mut means = Vec::with_capacity(data.n_cols());
    let mut stds = Vec::with_capacity(data.n_cols());
    let mut columns = Vec::with_capacity(data.n_cols());
    for j in 0..data.n_cols() {
        let col = data.column(j);
        let m = stats::mean(col);
        let s = stats::std_dev(col);
        if !(s > F::zero()) || !s.is_finite() {
            return Err(Error::Invariant(format!(
                "column `{}` has zero variance; preprocess must remove constant columns",
                data.name(j)
            )));
        }
        means.push(m);
        stds.push(s);
        columns.push(col.iter().map(|&v| (v - m) / s).collect::<Vec<F>>());
    }
    let scaled = Dataset::new(data.names().to_vec(), data.roles().to_vec(), columns)?;
    let stats = ScalingStats {
        names: data.names().to_vec(),
        means,
        stds,
    };
    Ok((scaled, stats))
}

/// Relative cell-wise distance used by the round-trip checks.
pub fn max_relative_error<F: Real>(a: &Dataset<F>, b: &Dataset<F>) -> F {
    let mut worst = F::zero();
    for j in 0..a.n_cols() {
        for (x, y) in a.column(j).iter().zip(b.column(j)) {
            let denom = x.abs().max(y.abs()).max(real(1e-30));
            let rel = (*x - *y).abs() / denom;
            if rel > worst {
                worst = rel;
            }
        }
    }
    worst
}
