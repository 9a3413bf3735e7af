//! Run configuration: a JSON config file whose values can be overridden by
//! command-line flags. The fully resolved configuration is embedded in
//! every output for reproducibility.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use treatrule::data::ColumnMapping;
use treatrule::error::{Error, Result};
use treatrule::learners::nuisance::FitSettings;
use treatrule::learners::{LearnerKind, LearnerSettings};
use treatrule::scores::{Identification, WelfareFamily, WelfareSpec};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataSection {
    pub path: String,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    /// Inline column mapping; alternatively `mapping_file` names a JSON
    /// file with the same keys.
    #[serde(default)]
    pub mapping: Option<ColumnMapping>,
    #[serde(default)]
    pub mapping_file: Option<String>,
}

fn default_delimiter() -> char {
    ','
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitSection {
    #[serde(default = "default_learner")]
    pub learner: String,
    #[serde(default)]
    pub bandwidth: Option<f64>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default = "default_trees")]
    pub trees: usize,
    #[serde(default = "default_min_leaf")]
    pub min_leaf: usize,
    #[serde(default = "default_trim")]
    pub trim: f64,
    #[serde(default = "default_pair_cap")]
    pub pair_cap: usize,
    #[serde(default = "default_folds")]
    pub folds: usize,
}

fn default_learner() -> String {
    "kernel".into()
}
fn default_trees() -> usize {
    50
}
fn default_min_leaf() -> usize {
    5
}
fn default_trim() -> f64 {
    0.01
}
fn default_pair_cap() -> usize {
    50_000
}
fn default_folds() -> usize {
    5
}

impl Default for FitSection {
    fn default() -> Self {
        FitSection {
            learner: default_learner(),
            bandwidth: None,
            k: None,
            trees: default_trees(),
            min_leaf: default_min_leaf(),
            trim: default_trim(),
            pair_cap: default_pair_cap(),
            folds: default_folds(),
        }
    }
}

impl FitSection {
    pub fn resolve(&self, seed: u64) -> Result<FitSettings> {
        let learner = match self.learner.as_str() {
            "kernel" => LearnerKind::Kernel,
            "knn" => LearnerKind::Knn,
            "forest" => LearnerKind::Forest,
            other => {
                return Err(Error::Config(format!(
                    "unknown learner '{other}' (expected kernel | knn | forest)"
                )))
            }
        };
        let settings = FitSettings {
            learner: LearnerSettings {
                learner,
                bandwidth: self.bandwidth,
                k: self.k,
                trees: self.trees,
                min_leaf: self.min_leaf,
                seed,
            },
            trim: self.trim,
            pair_cap: self.pair_cap,
            folds: self.folds,
            seed,
        };
        settings.validate()?;
        Ok(settings)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WelfareSection {
    #[serde(default = "default_family")]
    pub family: String,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default)]
    pub target_t: f64,
    #[serde(default = "default_identification")]
    pub identification: String,
}

fn default_family() -> String {
    "additive".into()
}
fn default_theta() -> f64 {
    0.5
}
fn default_identification() -> String {
    "dr".into()
}

impl Default for WelfareSection {
    fn default() -> Self {
        WelfareSection {
            family: default_family(),
            theta: default_theta(),
            target_t: 0.0,
            identification: default_identification(),
        }
    }
}

impl WelfareSection {
    pub fn family(&self) -> Result<WelfareFamily> {
        let family = match self.family.as_str() {
            "additive" => WelfareFamily::Additive,
            "atkinson_iop" => WelfareFamily::AtkinsonIop { theta: self.theta },
            "gini" => WelfareFamily::Gini,
            "iop_gini" => WelfareFamily::IopGini,
            "kendall_tau" => WelfareFamily::KendallTau { target: self.target_t },
            other => {
                return Err(Error::Config(format!(
                    "unknown welfare family '{other}' (expected additive | atkinson_iop | \
                     gini | iop_gini | kendall_tau)"
                )))
            }
        };
        family.validate()?;
        Ok(family)
    }

    pub fn resolve(&self) -> Result<WelfareSpec> {
        let identification = match self.identification.as_str() {
            "dm" => Identification::Dm,
            "ipw" => Identification::Ipw,
            "dr" => Identification::Dr,
            other => {
                return Err(Error::Config(format!(
                    "unknown identification '{other}' (expected dm | ipw | dr)"
                )))
            }
        };
        WelfareSpec::new(self.family()?, identification)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicySection {
    #[serde(default = "default_depth")]
    pub depth: u8,
    #[serde(default = "default_grid")]
    pub grid: String,
    /// Covariate names used as split features; empty = all covariates.
    #[serde(default)]
    pub features: Vec<String>,
}

fn default_depth() -> u8 {
    2
}
fn default_grid() -> String {
    "deciles".into()
}

impl Default for PolicySection {
    fn default() -> Self {
        PolicySection { depth: default_depth(), grid: default_grid(), features: vec![] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSection {
    #[serde(default = "default_dgp")]
    pub dgp: String,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_mc_draws")]
    pub mc_draws: usize,
    #[serde(default = "default_probe_n")]
    pub probe_n: usize,
    #[serde(default = "default_tau_step")]
    pub tau_step: f64,
}

fn default_dgp() -> String {
    "reference".into()
}
fn default_n_list() -> Vec<usize> {
    vec![500, 2000]
}
fn default_reps() -> usize {
    20
}
fn default_mc_draws() -> usize {
    1_000_000
}
fn default_probe_n() -> usize {
    1000
}
fn default_tau_step() -> f64 {
    0.02
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            dgp: default_dgp(),
            n_list: default_n_list(),
            reps: default_reps(),
            mc_draws: default_mc_draws(),
            probe_n: default_probe_n(),
            tau_step: default_tau_step(),
        }
    }
}

/// The full run configuration; every field has a default so a config file
/// is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub data: Option<DataSection>,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub welfare: WelfareSection,
    #[serde(default)]
    pub policy: PolicySection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn load(path: Option<&PathBuf>) -> Result<RunConfig> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("bad config {}: {e}", p.display())))
            }
        }
    }

    pub fn mapping(&self) -> Result<ColumnMapping> {
        let section = self
            .data
            .as_ref()
            .ok_or_else(|| Error::Config("no dataset configured (data.path / --data)".into()))?;
        if let Some(m) = &section.mapping {
            return Ok(m.clone());
        }
        let file = section.mapping_file.as_ref().ok_or_else(|| {
            Error::Config("data section needs either `mapping` or `mapping_file`".into())
        })?;
        let text = fs::read_to_string(Path::new(file))
            .map_err(|e| Error::Config(format!("cannot read mapping {file}: {e}")))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("bad mapping file {file}: {e}")))
    }
}
