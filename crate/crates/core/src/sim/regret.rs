//! Regret experiments: draw, fit, optimize, and compare the estimated
//! rule's oracle welfare against the best rule in the class, replicated
//! over seeds and sample sizes.

use std::collections::HashMap;

use serde::Serialize;

use super::dgp::{draw_sample, DgpSpec};
use super::oracle::oracle_welfare_batch;
use crate::error::{Error, Result};
use crate::learners::nuisance::FitSettings;
use crate::pipeline::analyze;
use crate::policy::{build_grid, enumerate_trees, optimize_policy, GridSpec, ThresholdGrid};
use crate::scores::{Identification, WelfareFamily, WelfareSpec};
use crate::util::{derived_rng, mean, sample_sd, splitmix64};

/// One replication of the experiment.
#[derive(Debug, Clone, Serialize)]
pub struct RegretRow {
    pub n: usize,
    pub replication: usize,
    /// In-sample estimated welfare of the selected rule.
    pub estimated_welfare: f64,
    /// Monte Carlo oracle welfare of the selected rule.
    pub oracle_welfare: f64,
    pub regret: f64,
}

/// Mean and spread of the regret at one sample size.
#[derive(Debug, Clone, Serialize)]
pub struct RegretPoint {
    pub n: usize,
    pub replications: usize,
    pub mean_regret: f64,
    pub sd_regret: f64,
}

/// Full experiment output: the class-best oracle welfare and the regret
/// behaviour per sample size.
#[derive(Debug, Clone, Serialize)]
pub struct RegretCurve {
    pub family: String,
    pub depth: u8,
    pub oracle_best: f64,
    pub oracle_best_se: f64,
    pub points: Vec<RegretPoint>,
    pub rows: Vec<RegretRow>,
}

/// Configuration for [`regret_experiment`].
#[derive(Debug, Clone)]
pub struct RegretConfig {
    pub depth: u8,
    pub grid: GridSpec,
    /// Covariate indices the trees may split on; None = all.
    pub features: Option<Vec<usize>>,
    pub n_list: Vec<usize>,
    pub replications: usize,
    pub mc_draws: usize,
    pub seed: u64,
}

impl Default for RegretConfig {
    fn default() -> Self {
        RegretConfig {
            depth: 1,
            grid: GridSpec::Deciles,
            features: None,
            n_list: vec![500, 2000],
            replications: 20,
            mc_draws: 1_000_000,
            seed: 0,
        }
    }
}

/// The policy class is anchored on a large reference draw so its cut grid
/// (hence the class and its best member) is identical across replications.
fn reference_grid(spec: &DgpSpec, cfg: &RegretConfig) -> Result<ThresholdGrid> {
    let reference = draw_sample(spec, 20_000, splitmix64(cfg.seed ^ 0x9F1D))?;
    let features: Vec<usize> =
        cfg.features.clone().unwrap_or_else(|| (0..spec.dim()).collect());
    build_grid(&reference.data, &features, cfg.grid)
}

/// Run the experiment: for each sample size and replication, draw a sample,
/// cross-fit, build doubly robust scores, optimize over the class, and
/// score the winner against the class-best oracle welfare (both by Monte
/// Carlo on shared draws, so regret is non-negative by construction).
pub fn regret_experiment(
    spec: &DgpSpec,
    family: &WelfareFamily,
    fit: &FitSettings,
    cfg: &RegretConfig,
) -> Result<RegretCurve> {
    if cfg.replications == 0 {
        return Err(Error::Argument("need at least one replication".into()));
    }
    let grid = reference_grid(spec, cfg)?;
    let class: Vec<_> = enumerate_trees(&grid, cfg.depth)?.collect();
    if class.len() > 200_000 {
        return Err(Error::Argument(format!(
            "policy class of {} trees is too large for the oracle sweep",
            class.len()
        )));
    }
    let oracle = oracle_welfare_batch(spec, &class, family, cfg.mc_draws, cfg.seed)?;
    let mut by_encoding: HashMap<Vec<u64>, usize> = HashMap::with_capacity(class.len());
    for (k, t) in class.iter().enumerate() {
        by_encoding.insert(t.encoding(), k);
    }
    let best = oracle
        .iter()
        .max_by(|a, b| a.value.partial_cmp(&b.value).unwrap())
        .expect("non-empty class");

    let welfare_spec = WelfareSpec::new(*family, Identification::Dr)?;
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for &n in &cfg.n_list {
        let mut regrets = Vec::with_capacity(cfg.replications);
        for rep in 0..cfg.replications {
            use rand::Rng;
            let mut stream = derived_rng(cfg.seed, (n as u64) << 20 | rep as u64);
            let draw_seed: u64 = stream.random();
            let sample = draw_sample(spec, n, draw_seed)?;
            let mut fit_rep = fit.clone();
            fit_rep.seed = stream.random();
            let scores = analyze(&sample.data, &welfare_spec, &fit_rep)?;
            let (tree, estimated) =
                optimize_policy(&sample.data, &scores, &welfare_spec, &grid, cfg.depth)?;
            let idx = *by_encoding
                .get(&tree.encoding())
                .ok_or_else(|| Error::Estimation("optimizer left the policy class".into()))?;
            let regret = best.value - oracle[idx].value;
            regrets.push(regret);
            rows.push(RegretRow {
                n,
                replication: rep,
                estimated_welfare: estimated,
                oracle_welfare: oracle[idx].value,
                regret,
            });
        }
        points.push(RegretPoint {
            n,
            replications: cfg.replications,
            mean_regret: mean(&regrets),
            sd_regret: sample_sd(&regrets),
        });
    }
    Ok(RegretCurve {
        family: family.name().into(),
        depth: cfg.depth,
        oracle_best: best.value,
        oracle_best_se: best.se,
        points,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{LearnerKind, LearnerSettings};

    fn fast_fit() -> FitSettings {
        FitSettings {
            learner: LearnerSettings {
                learner: LearnerKind::Knn,
                k: Some(8),
                ..Default::default()
            },
            folds: 3,
            pair_cap: 2_000,
            ..Default::default()
        }
    }

    #[test]
    fn depth0_class_has_zero_regret_when_constant_rule_is_best() {
        // Treat-everyone dominates pointwise, so the class optimum is a
        // constant rule the estimator finds easily.
        let mut spec = DgpSpec::randomized();
        spec.noise_sd = 0.05;
        let cfg = RegretConfig {
            depth: 0,
            n_list: vec![300],
            replications: 3,
            mc_draws: 40_000,
            seed: 5,
            ..Default::default()
        };
        let curve =
            regret_experiment(&spec, &WelfareFamily::Additive, &fast_fit(), &cfg).unwrap();
        assert_eq!(curve.points.len(), 1);
        assert!(curve.points[0].mean_regret.abs() < 1e-9, "{:?}", curve.points);
    }

    #[test]
    fn regret_is_never_negative() {
        let spec = DgpSpec::reference();
        let cfg = RegretConfig {
            depth: 1,
            n_list: vec![200],
            replications: 2,
            mc_draws: 20_000,
            seed: 9,
            ..Default::default()
        };
        let curve =
            regret_experiment(&spec, &WelfareFamily::Additive, &fast_fit(), &cfg).unwrap();
        for row in &curve.rows {
            assert!(row.regret >= 0.0);
        }
    }
}
