//! End-to-end wiring: fit the nuisances a welfare family needs, then build
//! its score set. The CLI and the simulation lab both drive this seam.

use std::sync::Arc;

use crate::data::{make_pair_folds, make_unit_folds, Dataset};
use crate::error::Result;
use crate::learners::nuisance::{fit_pair_nuisances, FitSettings};
use crate::learners::{fit_gamma, fit_phi, fit_propensity};
use crate::scores::{
    additive_scores, atkinson_scores, gini_scores, iop_gini_scores, kendall_scores,
    LinearNuisances, PairNuisances, ScoreSet, WelfareFamily, WelfareSpec,
};
use crate::ustat::gini_kernel;
use crate::util::sgn;

/// Fitted nuisances, shaped for the family that requested them.
pub enum FittedNuisances {
    Linear(LinearNuisances),
    Pair(Arc<PairNuisances>),
}

fn gini_target(data: &Dataset, u: usize, v: usize) -> f64 {
    gini_kernel(data.outcome()[u], data.outcome()[v])
}

fn kendall_target(data: &Dataset, u: usize, v: usize) -> f64 {
    let x1 = data.parental_outcome().expect("validated upstream");
    sgn(x1[u] - x1[v]) * sgn(data.outcome()[u] - data.outcome()[v])
}

/// Cross-fit the nuisances required by `family` with the given settings.
pub fn fit_nuisances(
    data: &Dataset,
    family: &WelfareFamily,
    settings: &FitSettings,
) -> Result<FittedNuisances> {
    settings.validate()?;
    family.validate()?;
    let all_cols: Vec<usize> = (0..data.k()).collect();
    match family {
        WelfareFamily::Additive | WelfareFamily::AtkinsonIop { .. } => {
            let folds = make_unit_folds(data.n(), settings.folds, settings.seed)?;
            let cols = match family {
                WelfareFamily::Additive => &all_cols,
                _ => data.circumstance_cols(),
            };
            let gamma = fit_gamma(data, &folds, settings, cols)?;
            let prop = fit_propensity(data, &folds, settings)?;
            let (gamma1, gamma0, gamma_obs) = gamma.unit_values(data);
            let (e, clamp_share) = prop.unit_values(data);
            Ok(FittedNuisances::Linear(LinearNuisances {
                gamma1,
                gamma0,
                gamma_obs,
                e,
                clamp_share,
            }))
        }
        WelfareFamily::Gini | WelfareFamily::KendallTau { .. } => {
            let units = make_unit_folds(data.n(), settings.folds, settings.seed)?;
            let pair_folds = make_pair_folds(units)?;
            let base = fit_pair_nuisances(data, &pair_folds, settings, None)?;
            let phi_fit = match family {
                WelfareFamily::Gini => {
                    fit_phi(data, &pair_folds, settings, &gini_target, &all_cols)?
                }
                _ => fit_phi(data, &pair_folds, settings, &kendall_target, &all_cols)?,
            };
            let phi = phi_fit.pair_values(data, &pair_folds);
            Ok(FittedNuisances::Pair(Arc::new(PairNuisances::from_fits(
                pair_folds,
                base.e.by_fold,
                None,
                Some(phi),
                base.clamp_share,
            ))))
        }
        WelfareFamily::IopGini => {
            let units = make_unit_folds(data.n(), settings.folds, settings.seed)?;
            let pair_folds = make_pair_folds(units)?;
            let circ: Vec<usize> = data.circumstance_cols().to_vec();
            let base = fit_pair_nuisances(data, &pair_folds, settings, Some(&circ))?;
            let gamma = Some((
                base.gamma1.expect("requested").by_fold,
                base.gamma0.expect("requested").by_fold,
            ));
            Ok(FittedNuisances::Pair(Arc::new(PairNuisances::from_fits(
                pair_folds,
                base.e.by_fold,
                gamma,
                None,
                base.clamp_share,
            ))))
        }
    }
}

/// Build the score set for `spec` from previously fitted nuisances.
pub fn build_scores(
    data: &Dataset,
    spec: &WelfareSpec,
    fitted: &FittedNuisances,
) -> Result<ScoreSet> {
    spec.validate_for(data)?;
    match (&spec.family, fitted) {
        (WelfareFamily::Additive, FittedNuisances::Linear(nuis)) => {
            Ok(ScoreSet::Linear(additive_scores(data, nuis, spec.identification)?))
        }
        (WelfareFamily::AtkinsonIop { theta }, FittedNuisances::Linear(nuis)) => {
            Ok(ScoreSet::Linear(atkinson_scores(data, nuis, *theta, spec.identification)?))
        }
        (WelfareFamily::Gini, FittedNuisances::Pair(nuis)) => {
            Ok(ScoreSet::Pair(gini_scores(data, Arc::clone(nuis), spec.identification)?))
        }
        (WelfareFamily::IopGini, FittedNuisances::Pair(nuis)) => {
            Ok(ScoreSet::Pair(iop_gini_scores(data, Arc::clone(nuis), spec.identification)?))
        }
        (WelfareFamily::KendallTau { .. }, FittedNuisances::Pair(nuis)) => {
            Ok(ScoreSet::Pair(kendall_scores(data, Arc::clone(nuis), spec.identification)?))
        }
        _ => Err(crate::error::Error::Argument(
            "fitted nuisances do not match the welfare family".into(),
        )),
    }
}

/// Fit and score in one step.
pub fn analyze(data: &Dataset, spec: &WelfareSpec, settings: &FitSettings) -> Result<ScoreSet> {
    spec.validate_for(data)?;
    let fitted = fit_nuisances(data, &spec.family, settings)?;
    build_scores(data, spec, &fitted)
}

/// Everything the report command needs: additive linear scores plus the
/// three pair-score families (Kendall only when a parental outcome exists).
pub fn build_report_bundle(
    data: &Dataset,
    settings: &FitSettings,
) -> Result<crate::policy::ScoreBundle> {
    use crate::scores::Identification::Dr;
    let additive = match analyze(
        data,
        &WelfareSpec::new(WelfareFamily::Additive, Dr)?,
        settings,
    )? {
        ScoreSet::Linear(l) => l,
        _ => unreachable!(),
    };
    let gini = match analyze(data, &WelfareSpec::new(WelfareFamily::Gini, Dr)?, settings)? {
        ScoreSet::Pair(p) => p,
        _ => unreachable!(),
    };
    let iop = match analyze(data, &WelfareSpec::new(WelfareFamily::IopGini, Dr)?, settings)? {
        ScoreSet::Pair(p) => p,
        _ => unreachable!(),
    };
    let kendall = if data.parental_outcome().is_some() {
        match analyze(
            data,
            &WelfareSpec::new(WelfareFamily::KendallTau { target: 0.0 }, Dr)?,
            settings,
        )? {
            ScoreSet::Pair(p) => Some(p),
            _ => unreachable!(),
        }
    } else {
        None
    };
    Ok(crate::policy::ScoreBundle { additive, gini, iop, kendall })
}
