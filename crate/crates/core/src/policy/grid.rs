//! Candidate cut grids for threshold trees.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Per-feature sorted candidate thresholds. Features are dataset column
/// indices; cut lists are strictly increasing and lie inside the observed
/// range, so every cut separates at least one unit from another.
#[derive(Debug, Clone)]
pub struct ThresholdGrid {
    features: Vec<usize>,
    cuts: Vec<Vec<f64>>,
}

impl ThresholdGrid {
    pub fn new(features: Vec<usize>, cuts: Vec<Vec<f64>>) -> Result<Self> {
        if features.len() != cuts.len() {
            return Err(Error::Argument("one cut list per feature required".into()));
        }
        if features.is_empty() {
            return Err(Error::Argument("grid needs at least one feature".into()));
        }
        for (slot, c) in cuts.iter().enumerate() {
            if c.is_empty() {
                return Err(Error::Argument(format!(
                    "empty cut list for grid feature slot {slot}"
                )));
            }
            if c.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Argument(format!(
                    "cuts for grid feature slot {slot} must be strictly increasing"
                )));
            }
        }
        Ok(ThresholdGrid { features, cuts })
    }

    /// Dataset column indices covered by the grid.
    pub fn features(&self) -> &[usize] {
        &self.features
    }

    pub fn n_slots(&self) -> usize {
        self.features.len()
    }

    pub fn cuts(&self, slot: usize) -> &[f64] {
        &self.cuts[slot]
    }

    /// All (slot, cut index) candidates in lexicographic order.
    pub fn candidates(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for slot in 0..self.n_slots() {
            for c in 0..self.cuts[slot].len() {
                out.push((slot, c));
            }
        }
        out
    }
}

/// How to pick candidate cuts from the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpec {
    /// Empirical deciles (interior, deduplicated).
    Deciles,
    /// Every distinct observed value except the maximum.
    AllValues,
    /// Interior j/Q quantiles for j = 1..Q-1.
    Quantiles(usize),
}

impl GridSpec {
    /// Parse "deciles", "all" or "quantiles:Q".
    pub fn parse(s: &str) -> Result<GridSpec> {
        match s {
            "deciles" => Ok(GridSpec::Deciles),
            "all" => Ok(GridSpec::AllValues),
            other => match other.strip_prefix("quantiles:") {
                Some(q) => {
                    let q: usize = q
                        .parse()
                        .map_err(|_| Error::Config(format!("bad quantile count in '{other}'")))?;
                    if q < 2 {
                        return Err(Error::Config("quantile grid needs Q >= 2".into()));
                    }
                    Ok(GridSpec::Quantiles(q))
                }
                None => Err(Error::Config(format!(
                    "unknown grid spec '{other}' (expected deciles | all | quantiles:Q)"
                ))),
            },
        }
    }
}

/// Linear-interpolation empirical quantile of a sorted slice.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let m = sorted.len();
    let pos = q * (m as f64 - 1.0);
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 >= m {
        sorted[m - 1]
    } else {
        sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
    }
}

/// Build the candidate grid for the given dataset columns.
pub fn build_grid(data: &Dataset, features: &[usize], spec: GridSpec) -> Result<ThresholdGrid> {
    let mut cuts = Vec::with_capacity(features.len());
    for &f in features {
        if f >= data.k() {
            return Err(Error::Argument(format!("feature index {f} out of range")));
        }
        let mut values = data.column(f).to_vec();
        values.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        let max = *values.last().unwrap();
        let mut c: Vec<f64> = match spec {
            GridSpec::Deciles => (1..10).map(|j| quantile_sorted(&values, j as f64 / 10.0)).collect(),
            GridSpec::Quantiles(q) => {
                (1..q).map(|j| quantile_sorted(&values, j as f64 / q as f64)).collect()
            }
            GridSpec::AllValues => {
                let mut v = values.clone();
                v.dedup();
                v
            }
        };
        c.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        c.dedup();
        c.retain(|&v| v < max);
        if c.is_empty() {
            return Err(Error::Argument(format!(
                "no usable cuts for column '{}' (constant column?)",
                data.column_names()[f]
            )));
        }
        cuts.push(c);
    }
    ThresholdGrid::new(features.to_vec(), cuts)
}
