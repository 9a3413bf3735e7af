//! Orthogonality probes: perturb a first-stage nuisance by tau * h,
//! re-estimate welfare with the orthogonal estimator and with the plug-in
//! estimator that leans on the perturbed nuisance, and compare the
//! finite-difference slopes at tau = 0. Orthogonal scores should be flat to
//! first order; the plug-in moves at the rate of the perturbation mean.
//!
//! Two perturbation targets are supported: the outcome-regression nuisance
//! (gamma for the Atkinson and IOp kernels, the pairwise conditional mean
//! for the Gini kernel; plug-in comparator is the direct method) and the
//! propensity (plug-in comparator is inverse propensity weighting, since
//! the direct method never touches e).

use std::sync::Arc;

use serde::Serialize;

use super::dgp::{draw_sample, oracle_linear_nuisances, oracle_pair_nuisances, DgpSpec};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::policy::{estimate_welfare, PolicyTree, Split};
use crate::scores::{
    atkinson_scores, gini_scores, iop_gini_scores, Identification, LinearNuisances,
    PairNuisances, ScoreSet, WelfareFamily, WelfareSpec,
};
use crate::ustat::pair_from_index;

/// Direction of the nuisance perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    /// h = 0 (both slopes must vanish).
    Zero,
    /// h(x) = sin(x_1), a smooth bounded direction with nonzero mean on
    /// the covariate support.
    SinFirst,
}

impl Perturbation {
    fn unit_value(&self, data: &Dataset, i: usize) -> f64 {
        match self {
            Perturbation::Zero => 0.0,
            Perturbation::SinFirst => data.column(0)[i].sin(),
        }
    }

    /// Pairwise direction for the phi nuisance: the symmetrized unit
    /// direction.
    fn pair_value(&self, data: &Dataset, i: usize, j: usize) -> f64 {
        0.5 * (self.unit_value(data, i) + self.unit_value(data, j))
    }
}

/// Which nuisance the probe perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbTarget {
    /// gamma (or the pairwise conditional mean for the Gini kernel).
    OutcomeRegression,
    /// The propensity score.
    Propensity,
}

/// Welfare curves along the perturbation for both estimators, plus the
/// central finite-difference slopes at tau = 0.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeCurve {
    pub taus: Vec<f64>,
    pub w_orthogonal: Vec<f64>,
    pub w_plugin: Vec<f64>,
    pub slope_orthogonal: f64,
    pub slope_plugin: f64,
}

fn perturb_gamma_linear(
    base: &LinearNuisances,
    data: &Dataset,
    h: Perturbation,
    tau: f64,
) -> LinearNuisances {
    let mut out = base.clone();
    for i in 0..data.n() {
        let hv = tau * h.unit_value(data, i);
        out.gamma1[i] += hv;
        out.gamma0[i] += hv;
        out.gamma_obs[i] += hv;
    }
    out
}

fn perturb_e(e: &[f64], data: &Dataset, h: Perturbation, tau: f64) -> Vec<f64> {
    e.iter()
        .enumerate()
        .map(|(i, &v)| (v + tau * h.unit_value(data, i)).clamp(1e-3, 1.0 - 1e-3))
        .collect()
}

/// The fixed evaluation policy: a median split on the first feature so all
/// four treatment combinations carry weight.
fn probe_policy(spec: &DgpSpec) -> PolicyTree {
    let super::dgp::CovariateLaw::Uniform { low, high, .. } = spec.covariates;
    PolicyTree::Depth1 {
        split: Split { feature: 0, threshold: 0.5 * (low + high) },
        leaves: [false, true],
    }
}

/// Run the probe for one seeded draw. Supported families: Atkinson IOp,
/// IOp-Gini and Gini.
pub fn orthogonality_probe(
    spec: &DgpSpec,
    family: &WelfareFamily,
    n: usize,
    seed: u64,
    tau_grid: &[f64],
    h: Perturbation,
    target: PerturbTarget,
) -> Result<ProbeCurve> {
    if tau_grid.is_empty() {
        return Err(Error::Argument("empty tau grid".into()));
    }
    let sample = draw_sample(spec, n, seed)?;
    let data = &sample.data;
    let policy = probe_policy(spec);
    let eval_spec = WelfareSpec::new(*family, Identification::Dr)?;
    let plugin_ident = match target {
        PerturbTarget::OutcomeRegression => Identification::Dm,
        PerturbTarget::Propensity => Identification::Ipw,
    };

    let mut w_orth = Vec::with_capacity(tau_grid.len());
    let mut w_plug = Vec::with_capacity(tau_grid.len());
    for &tau in tau_grid {
        let (orth, plug): (ScoreSet, ScoreSet) = match family {
            WelfareFamily::AtkinsonIop { theta } => {
                let base = oracle_linear_nuisances(&sample);
                let nuis = match target {
                    PerturbTarget::OutcomeRegression => {
                        perturb_gamma_linear(&base, data, h, tau)
                    }
                    PerturbTarget::Propensity => {
                        let mut out = base.clone();
                        out.e = perturb_e(&base.e, data, h, tau);
                        out
                    }
                };
                (
                    ScoreSet::Linear(atkinson_scores(data, &nuis, *theta, Identification::Dr)?),
                    ScoreSet::Linear(atkinson_scores(data, &nuis, *theta, plugin_ident)?),
                )
            }
            WelfareFamily::IopGini => {
                let t = &sample.truth;
                let nuis = match target {
                    PerturbTarget::OutcomeRegression => {
                        let mut g1 = t.gamma1.clone();
                        let mut g0 = t.gamma0.clone();
                        for i in 0..data.n() {
                            let hv = tau * h.unit_value(data, i);
                            g1[i] += hv;
                            g0[i] += hv;
                        }
                        PairNuisances::from_oracle(t.e.clone(), Some((g1, g0)), None)
                    }
                    PerturbTarget::Propensity => PairNuisances::from_oracle(
                        perturb_e(&t.e, data, h, tau),
                        Some((t.gamma1.clone(), t.gamma0.clone())),
                        None,
                    ),
                };
                let nuis = Arc::new(nuis);
                (
                    ScoreSet::Pair(iop_gini_scores(data, Arc::clone(&nuis), Identification::Dr)?),
                    ScoreSet::Pair(iop_gini_scores(data, nuis, plugin_ident)?),
                )
            }
            WelfareFamily::Gini => {
                let base = oracle_pair_nuisances(spec, &sample, family)?;
                let phi0 = base.phi().expect("gini oracle carries phi");
                let nuis = match target {
                    PerturbTarget::OutcomeRegression => {
                        let n_units = data.n();
                        let mut phi: [Vec<f64>; 4] = phi0.clone();
                        for slice in phi.iter_mut() {
                            for (p, v) in slice.iter_mut().enumerate() {
                                let (i, j) = pair_from_index(n_units, p);
                                *v += tau * h.pair_value(data, i, j);
                            }
                        }
                        PairNuisances::from_oracle(sample.truth.e.clone(), None, Some(phi))
                    }
                    PerturbTarget::Propensity => PairNuisances::from_oracle(
                        perturb_e(&sample.truth.e, data, h, tau),
                        None,
                        Some(phi0.clone()),
                    ),
                };
                let nuis = Arc::new(nuis);
                (
                    ScoreSet::Pair(gini_scores(data, Arc::clone(&nuis), Identification::Dr)?),
                    ScoreSet::Pair(gini_scores(data, nuis, plugin_ident)?),
                )
            }
            other => {
                return Err(Error::Argument(format!(
                    "orthogonality probe not defined for family {}",
                    other.name()
                )))
            }
        };
        w_orth.push(estimate_welfare(data, &orth, &policy, &eval_spec)?);
        w_plug.push(estimate_welfare(data, &plug, &policy, &eval_spec)?);
    }

    // Central difference at the smallest positive tau with a matching
    // negative point.
    let slope = |w: &[f64]| -> Result<f64> {
        let mut best: Option<(f64, usize, usize)> = None;
        for (k, &t) in tau_grid.iter().enumerate() {
            if t > 0.0 {
                if let Some(neg) = tau_grid.iter().position(|&u| u == -t) {
                    if best.map_or(true, |(bt, _, _)| t < bt) {
                        best = Some((t, k, neg));
                    }
                }
            }
        }
        let (t, k_pos, k_neg) =
            best.ok_or_else(|| Error::Argument("tau grid needs a symmetric +-step".into()))?;
        Ok((w[k_pos] - w[k_neg]) / (2.0 * t))
    };
    let slope_orthogonal = slope(&w_orth)?;
    let slope_plugin = slope(&w_plug)?;
    Ok(ProbeCurve {
        taus: tau_grid.to_vec(),
        w_orthogonal: w_orth,
        w_plugin: w_plug,
        slope_orthogonal,
        slope_plugin,
    })
}

/// Convenience: share of `seeds` replications where the orthogonal slope is
/// strictly smaller in absolute value than the plug-in slope.
pub fn probe_experiment(
    spec: &DgpSpec,
    family: &WelfareFamily,
    n: usize,
    seeds: std::ops::Range<u64>,
    tau_step: f64,
    h: Perturbation,
    target: PerturbTarget,
) -> Result<(f64, Vec<ProbeCurve>)> {
    let grid = [-tau_step, 0.0, tau_step];
    let mut curves = Vec::new();
    let mut wins = 0usize;
    let total = seeds.clone().count().max(1);
    for s in seeds {
        let c = orthogonality_probe(spec, family, n, s, &grid, h, target)?;
        if c.slope_orthogonal.abs() < c.slope_plugin.abs() {
            wins += 1;
        }
        curves.push(c);
    }
    Ok((wins as f64 / total as f64, curves))
}
