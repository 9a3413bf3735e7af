//! Delimited-text ingestion with listwise deletion of incomplete rows.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Names the roles of the input columns. Loaded from a structured config
/// file with keys `outcome`, `treatment`, `covariates`, `parental_outcome`
/// (optional) and `circumstances` (subset of `covariates`; empty = all).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub outcome: String,
    pub treatment: String,
    pub covariates: Vec<String>,
    #[serde(default)]
    pub parental_outcome: Option<String>,
    #[serde(default)]
    pub circumstances: Vec<String>,
}

/// A loaded dataset together with the number of rows dropped for missing
/// values in mapped columns.
#[derive(Debug)]
pub struct LoadReport {
    pub dataset: Dataset,
    pub rows_dropped: usize,
}

fn is_missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f.eq_ignore_ascii_case("na") || f.eq_ignore_ascii_case("nan") || f == "."
}

fn parse_field(field: &str, row: usize, col: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| {
        Error::Data(format!("cannot parse '{}' in column '{col}' at row {row}", field.trim()))
    })
}

/// Load a delimited text file (header row required) according to `mapping`.
/// Rows with missing values in any mapped column are dropped and counted.
pub fn load_dataset(path: &Path, mapping: &ColumnMapping, delimiter: char) -> Result<LoadReport> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    load_dataset_str(&text, mapping, delimiter)
}

/// As [`load_dataset`] but from an in-memory string.
pub fn load_dataset_str(
    text: &str,
    mapping: &ColumnMapping,
    delimiter: char,
) -> Result<LoadReport> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Data("empty input file".into()))?;
    let header: Vec<&str> = header.split(delimiter).map(str::trim).collect();
    let find = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Error::Config(format!("mapped column '{name}' not found in header")))
    };

    let y_idx = find(&mapping.outcome)?;
    let d_idx = find(&mapping.treatment)?;
    let mut x_idx = Vec::with_capacity(mapping.covariates.len());
    for c in &mapping.covariates {
        x_idx.push(find(c)?);
    }
    if x_idx.is_empty() {
        return Err(Error::Config("mapping must name at least one covariate".into()));
    }
    let p_idx = match &mapping.parental_outcome {
        Some(c) => Some(find(c)?),
        None => None,
    };
    for c in &mapping.circumstances {
        if !mapping.covariates.contains(c) {
            return Err(Error::Config(format!(
                "circumstance '{c}' is not among the mapped covariates"
            )));
        }
    }

    let mut y = Vec::new();
    let mut d = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); x_idx.len()];
    let mut x1: Vec<f64> = Vec::new();
    let mut rows_dropped = 0usize;

    for (row_no, line) in lines.enumerate() {
        let row = row_no + 1; // 1-based, excluding header
        let fields: Vec<&str> = line.split(delimiter).collect();
        if fields.len() != header.len() {
            return Err(Error::Data(format!(
                "row {row} has {} fields, header has {}",
                fields.len(),
                header.len()
            )));
        }
        let mut used = Vec::with_capacity(3 + x_idx.len());
        used.push(y_idx);
        used.push(d_idx);
        used.extend_from_slice(&x_idx);
        if let Some(p) = p_idx {
            used.push(p);
        }
        if used.iter().any(|&j| is_missing(fields[j])) {
            rows_dropped += 1;
            continue;
        }
        let d_val = parse_field(fields[d_idx], row, &mapping.treatment)?;
        if d_val != 0.0 && d_val != 1.0 {
            return Err(Error::Data(format!(
                "treatment column '{}' must be 0 or 1, found {} at row {row}",
                mapping.treatment, fields[d_idx].trim()
            )));
        }
        y.push(parse_field(fields[y_idx], row, &mapping.outcome)?);
        d.push(d_val as u8);
        for (slot, &j) in x_idx.iter().enumerate() {
            columns[slot].push(parse_field(fields[j], row, &mapping.covariates[slot])?);
        }
        if let Some(p) = p_idx {
            x1.push(parse_field(
                fields[p],
                row,
                mapping.parental_outcome.as_deref().unwrap_or(""),
            )?);
        }
    }

    if y.is_empty() {
        return Err(Error::Data("no usable rows after listwise deletion".into()));
    }
    let dataset = Dataset::new(
        y,
        d,
        columns,
        mapping.covariates.clone(),
        if p_idx.is_some() { Some(x1) } else { None },
        &mapping.circumstances,
    )?;
    Ok(LoadReport { dataset, rows_dropped })
}
