//! First-stage regression learners and cross-fitted nuisance estimation.
//!
//! The learner interface is exchangeable: everything downstream is a
//! function of predictions only.

mod forest;
mod kernel;
mod knn;
pub mod nuisance;

pub use forest::Forest;
pub use kernel::NadarayaWatson;
pub use knn::Knn;
pub use nuisance::{
    fit_gamma, fit_outcome_mean, fit_pair_nuisances, fit_phi, fit_propensity, FitSettings,
    GammaFit, PhiFit, PropensityFit,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A row-major feature matrix.
#[derive(Debug, Clone, Default)]
pub struct RowMatrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl RowMatrix {
    pub fn with_capacity(rows: usize, cols: usize) -> Self {
        RowMatrix { data: Vec::with_capacity(rows * cols), rows: 0, cols }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut m = RowMatrix::with_capacity(rows.len(), cols);
        for r in &rows {
            if r.len() != cols {
                return Err(Error::Argument("ragged feature rows".into()));
            }
            m.push_row(r);
        }
        Ok(m)
    }

    pub fn push_row(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.cols);
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }
}

/// A fitted regression: predicts a real value from a feature row.
pub trait Regressor: Send + Sync {
    fn predict_one(&self, x: &[f64]) -> f64;

    fn predict(&self, xs: &RowMatrix) -> Vec<f64> {
        (0..xs.n_rows()).map(|i| self.predict_one(xs.row(i))).collect()
    }
}

/// A regression learner: fits features to targets.
pub trait Learner: Send + Sync {
    fn fit(&self, x: &RowMatrix, y: &[f64]) -> Result<Box<dyn Regressor>>;
}

/// Which learner backs the first stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    /// Nadaraya-Watson kernel regression with a Gaussian product kernel.
    Kernel,
    /// k-nearest-neighbours regression.
    Knn,
    /// Bagged regression trees.
    Forest,
}

/// Learner choice plus hyperparameters, as exposed through config keys.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LearnerSettings {
    pub learner: LearnerKind,
    /// Kernel bandwidth; `None` selects the per-dimension rule of thumb.
    #[serde(default)]
    pub bandwidth: Option<f64>,
    /// Neighbour count; `None` selects ceil(sqrt(ceil(m^(2/3)))) for m
    /// training rows.
    #[serde(default)]
    pub k: Option<usize>,
    /// Number of bagged trees.
    #[serde(default = "default_trees")]
    pub trees: usize,
    /// Minimum leaf size for the forest.
    #[serde(default = "default_min_leaf")]
    pub min_leaf: usize,
    /// Seed for the forest's bootstrap resamples.
    #[serde(default)]
    pub seed: u64,
}

fn default_trees() -> usize {
    50
}

fn default_min_leaf() -> usize {
    5
}

impl Default for LearnerSettings {
    fn default() -> Self {
        LearnerSettings {
            learner: LearnerKind::Kernel,
            bandwidth: None,
            k: None,
            trees: default_trees(),
            min_leaf: default_min_leaf(),
            seed: 0,
        }
    }
}

impl LearnerSettings {
    pub fn build(&self) -> Box<dyn Learner> {
        match self.learner {
            LearnerKind::Kernel => Box::new(NadarayaWatson::new(self.bandwidth)),
            LearnerKind::Knn => Box::new(Knn::new(self.k)),
            LearnerKind::Forest => {
                Box::new(Forest::new(self.trees, self.min_leaf, 12, self.seed))
            }
        }
    }
}
