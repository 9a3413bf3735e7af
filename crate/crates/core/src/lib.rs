//! Estimation of optimal binary treatment rules for distribution-aware
//! social welfare objectives: average outcomes, Atkinson-style inequality of
//! opportunity, Gini, IOp-Gini and Kendall-tau rank-dependence targets.
//!
//! The pipeline is: load or simulate a sample, cross-fit the first-stage
//! nuisances (outcome means, propensities, pairwise conditional means),
//! build orthogonal per-unit or per-pair scores, and exhaustively search
//! shallow threshold trees for the welfare-maximizing rule. A simulation lab
//! provides synthetic data generators, Monte Carlo welfare oracles, regret
//! experiments and orthogonality probes.

pub mod data;
pub mod error;
pub mod learners;
pub mod pipeline;
pub mod policy;
pub mod scores;
pub mod sim;
pub mod ustat;
pub mod util;

pub use error::{Error, Result};
