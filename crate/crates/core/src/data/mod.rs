//! Core domain types: the observed sample, column mapping and ingestion,
//! and the unit/pair fold assignments used for cross-fitting.

mod folds;
mod load;

pub use folds::{
    make_pair_folds, make_unit_folds, FoldAssignment, PairFold, PairFoldAssignment, PairFoldKind,
};
pub use load::{load_dataset, ColumnMapping, LoadReport};

use crate::error::{Error, Result};

/// An observed sample `(Y_i, D_i, X_i, X_{1i})` with named covariate columns
/// and a designated subset of circumstance columns. Immutable after
/// construction; shared freely across parallel workers.
#[derive(Debug, Clone)]
pub struct Dataset {
    y: Vec<f64>,
    d: Vec<u8>,
    columns: Vec<Vec<f64>>,
    names: Vec<String>,
    x1: Option<Vec<f64>>,
    circumstance_cols: Vec<usize>,
}

impl Dataset {
    /// Build and validate a dataset. `circumstances` is the subset of column
    /// names treated as circumstances; empty means all covariates.
    pub fn new(
        y: Vec<f64>,
        d: Vec<u8>,
        columns: Vec<Vec<f64>>,
        names: Vec<String>,
        x1: Option<Vec<f64>>,
        circumstances: &[String],
    ) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(Error::Data(format!("need at least 2 units, got {n}")));
        }
        if d.len() != n {
            return Err(Error::Data(format!(
                "treatment column has length {}, outcome has {n}",
                d.len()
            )));
        }
        if columns.len() != names.len() {
            return Err(Error::Config(format!(
                "{} covariate columns but {} names",
                columns.len(),
                names.len()
            )));
        }
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::Data(format!(
                    "covariate column '{}' has length {}, expected {n}",
                    names[j],
                    col.len()
                )));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::Data(format!(
                    "non-finite value in column '{}' at row {i}",
                    names[j]
                )));
            }
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite outcome at row {i}")));
        }
        if let Some(i) = d.iter().position(|&v| v > 1) {
            return Err(Error::Data(format!(
                "treatment must be 0 or 1, found {} at row {i}",
                d[i]
            )));
        }
        if let Some(ref p) = x1 {
            if p.len() != n {
                return Err(Error::Data(format!(
                    "parental outcome has length {}, expected {n}",
                    p.len()
                )));
            }
            if let Some(i) = p.iter().position(|v| !v.is_finite()) {
                return Err(Error::Data(format!(
                    "non-finite parental outcome at row {i}"
                )));
            }
        }
        let circumstance_cols = if circumstances.is_empty() {
            (0..names.len()).collect()
        } else {
            let mut idx = Vec::with_capacity(circumstances.len());
            for c in circumstances {
                match names.iter().position(|n| n == c) {
                    Some(j) => idx.push(j),
                    None => {
                        return Err(Error::Config(format!(
                            "circumstance column '{c}' is not a covariate"
                        )))
                    }
                }
            }
            idx.sort_unstable();
            idx.dedup();
            idx
        };
        Ok(Dataset { y, d, columns, names, x1, circumstance_cols })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Number of covariate columns.
    pub fn k(&self) -> usize {
        self.columns.len()
    }

    pub fn outcome(&self) -> &[f64] {
        &self.y
    }

    pub fn treatment(&self) -> &[u8] {
        &self.d
    }

    pub fn parental_outcome(&self) -> Option<&[f64]> {
        self.x1.as_deref()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn column_names(&self) -> &[String] {
        &self.names
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Indices of the columns designated as circumstances.
    pub fn circumstance_cols(&self) -> &[usize] {
        &self.circumstance_cols
    }

    /// Gather the covariate row `i` restricted to `cols`, appending to `out`.
    pub fn gather_row(&self, i: usize, cols: &[usize], out: &mut Vec<f64>) {
        for &j in cols {
            out.push(self.columns[j][i]);
        }
    }

    /// Number of treated units.
    pub fn n_treated(&self) -> usize {
        self.d.iter().filter(|&&d| d == 1).count()
    }

    /// Number of unordered pairs i < j.
    pub fn n_pairs(&self) -> usize {
        self.n() * (self.n() - 1) / 2
    }
}
