//! CSV ingestion with a role manifest, plus the writers used by the dataset
//! generator. Missing cells (empty or `NaN`) load as NaN markers and are
//! resolved by `preprocess`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::{real, Real};

use super::{ColumnRole, Dataset};

/// Parses the line-based manifest: one `column_name,role` pair per line,
/// `#` comments and blank lines allowed. Matching is case-sensitive.
pub fn parse_manifest(text: &str) -> Result<BTreeMap<String, ColumnRole>> {
    let mut roles = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, role_str) = line.split_once(',').ok_or_else(|| {
            Error::Format(format!(
                "manifest line {}: expected `name,role`, got `{line}`",
                lineno + 1
            ))
        })?;
        let name = name.trim().to_string();
        let role = ColumnRole::parse(role_str.trim()).ok_or_else(|| {
            Error::Format(format!(
                "manifest line {}: unknown role `{}`",
                lineno + 1,
                role_str.trim()
            ))
        })?;
        if roles.insert(name.clone(), role).is_some() {
            return Err(Error::NamedColumn {
                name,
                problem: "assigned a role more than once in the manifest".into(),
            });
        }
    }
    if roles.is_empty() {
        return Err(Error::Format("manifest assigns no roles".into()));
    }
    Ok(roles)
}

fn parse_cell<F: Real>(cell: &str, row: usize, column: &str) -> Result<F> {
    let t = cell.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("nan") {
        return Ok(F::nan());
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_nan() => Ok(F::nan()),
        Ok(v) => Ok(real(v)),
        Err(_) => Err(Error::Parse {
            row,
            column: column.to_string(),
            cell: t.to_string(),
        }),
    }
}

/// Loads a header-first CSV and attaches roles from the manifest file.
/// Columns keep their CSV order. Every header must be assigned a role and
/// every manifest entry must name a header.
pub fn load_csv<F: Real>(path: &Path, manifest: &Path) -> Result<Dataset<F>> {
    let manifest_text = fs::read_to_string(manifest)?;
    let roles_by_name = parse_manifest(&manifest_text)?;

    let raw = fs::read_to_string(path)?;
    if raw.trim().is_empty() {
        return Err(Error::Format(format!(
            "CSV file `{}` is empty",
            path.display()
        )));
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(raw.as_bytes());

    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() {
        return Err(Error::Format("CSV has no header row".into()));
    }

    let mut roles = Vec::with_capacity(headers.len());
    for h in &headers {
        match roles_by_name.get(h) {
            Some(r) => roles.push(*r),
            None => {
                return Err(Error::NamedColumn {
                    name: h.clone(),
                    problem: "appears in the CSV header but has no manifest role".into(),
                })
            }
        }
    }
    for name in roles_by_name.keys() {
        if !headers.contains(name) {
            return Err(Error::NamedColumn {
                name: name.clone(),
                problem: "is listed in the manifest but absent from the CSV header".into(),
            });
        }
    }

    let mut columns: Vec<Vec<F>> = vec![Vec::new(); headers.len()];
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::Format(format!(
                "row {} has {} fields, header has {}",
                row_idx + 1,
                record.len(),
                headers.len()
            )));
        }
        for (j, cell) in record.iter().enumerate() {
            columns[j].push(parse_cell(cell, row_idx + 1, &headers[j])?);
        }
    }

    Dataset::new(headers, roles, columns)
}

/// Writes the dataset as a header-first CSV. Floats print in Rust's shortest
/// round-trip form, which keeps repeated runs byte-identical.
pub fn write_csv<F: Real>(data: &Dataset<F>, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&data.names().join(","));
    out.push('\n');
    for i in 0..data.n_rows() {
        for j in 0..data.n_cols() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{}", data.column(j)[i]));
        }
        out.push('\n');
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Writes the `name,role` manifest for a dataset.
pub fn write_manifest<F: Real>(data: &Dataset<F>, path: &Path) -> Result<()> {
    let mut out = String::new();
    for j in 0..data.n_cols() {
        out.push_str(&format!("{},{}\n", data.name(j), data.role(j).as_str()));
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}
