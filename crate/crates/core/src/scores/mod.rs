//! Orthogonal (locally robust) score sets for each welfare family under
//! direct-method, inverse-propensity or doubly-robust identification.

mod ipw;
mod linear;
mod pair;

pub use ipw::{additive_scores_ipw_orth, gini_scores_ipw_orth};
pub use linear::{additive_scores, atkinson_scores, atkinson_utility, LinearNuisances, LinearScoreSet};
pub use pair::{
    gini_scores, iop_gini_scores, kendall_scores, FoldValues, PairNuisances, PairScoreSet,
    PairScoreSource,
};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// The supported social welfare families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum WelfareFamily {
    /// Average outcome.
    Additive,
    /// Atkinson-transformed inequality-of-opportunity welfare
    /// E[U(gamma(X))], with U the power/log utility with aversion theta.
    AtkinsonIop { theta: f64 },
    /// Mean times one minus the Gini of the outcome, as the pairwise
    /// min-kernel expectation.
    Gini,
    /// Mean times one minus the Gini of the circumstance predictions.
    IopGini,
    /// Negative distance of the Kendall rank correlation between outcome
    /// and parental outcome from a target value.
    KendallTau { target: f64 },
}

impl WelfareFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            WelfareFamily::AtkinsonIop { theta } => {
                if !(theta > 0.0 && theta <= 1.0) {
                    return Err(Error::Argument(format!(
                        "theta must lie in (0, 1], got {theta}"
                    )));
                }
            }
            WelfareFamily::KendallTau { target } => {
                if !(-1.0..=1.0).contains(&target) {
                    return Err(Error::Argument(format!(
                        "target t must lie in [-1, 1], got {target}"
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Whether welfare is a pairwise (U-statistic) functional.
    pub fn is_pair(&self) -> bool {
        matches!(
            self,
            WelfareFamily::Gini | WelfareFamily::IopGini | WelfareFamily::KendallTau { .. }
        )
    }

    pub fn requires_parental_outcome(&self) -> bool {
        matches!(self, WelfareFamily::KendallTau { .. })
    }

    pub fn requires_positive_outcome(&self) -> bool {
        matches!(self, WelfareFamily::AtkinsonIop { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            WelfareFamily::Additive => "additive",
            WelfareFamily::AtkinsonIop { .. } => "atkinson_iop",
            WelfareFamily::Gini => "gini",
            WelfareFamily::IopGini => "iop_gini",
            WelfareFamily::KendallTau { .. } => "kendall_tau",
        }
    }
}

/// How counterfactual welfare is identified from observables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Identification {
    /// Direct method: plug-in conditional means, no correction terms.
    Dm,
    /// Inverse propensity weighting: plug-in weighted kernel, no
    /// correction terms.
    Ipw,
    /// Doubly robust orthogonal scores (the default).
    Dr,
}

/// A welfare family together with the identification strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelfareSpec {
    #[serde(flatten)]
    pub family: WelfareFamily,
    pub identification: Identification,
}

impl WelfareSpec {
    pub fn new(family: WelfareFamily, identification: Identification) -> Result<Self> {
        family.validate()?;
        Ok(WelfareSpec { family, identification })
    }

    pub fn dr(family: WelfareFamily) -> Result<Self> {
        WelfareSpec::new(family, Identification::Dr)
    }

    /// Check the dataset satisfies the family's requirements.
    pub fn validate_for(&self, data: &Dataset) -> Result<()> {
        if self.family.requires_parental_outcome() && data.parental_outcome().is_none() {
            return Err(Error::Config(
                "kendall_tau welfare requires a parental outcome column".into(),
            ));
        }
        if self.family.requires_positive_outcome() {
            if let Some(i) = data.outcome().iter().position(|&y| y <= 0.0) {
                return Err(Error::Data(format!(
                    "atkinson_iop welfare needs Y > 0 for all units; row {i} has Y = {}",
                    data.outcome()[i]
                )));
            }
        }
        Ok(())
    }
}

/// Per-unit or per-pair scores, matching the welfare family's shape.
#[derive(Clone)]
pub enum ScoreSet {
    Linear(LinearScoreSet),
    Pair(PairScoreSet),
}

impl ScoreSet {
    pub fn n(&self) -> usize {
        match self {
            ScoreSet::Linear(s) => s.n(),
            ScoreSet::Pair(s) => s.n(),
        }
    }

    /// Share of raw propensity predictions clamped by the trimming bounds.
    pub fn clamped_share(&self) -> f64 {
        match self {
            ScoreSet::Linear(s) => s.clamped_share,
            ScoreSet::Pair(s) => s.clamped_share(),
        }
    }
}
