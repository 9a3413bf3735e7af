//! Welfare estimation for a fixed policy from a score set.

use super::tree::PolicyTree;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scores::{PairScoreSet, ScoreSet, WelfareFamily, WelfareSpec};
use crate::ustat::pair_from_index;
use crate::util::par_chunk_sum;

/// Pair mean of the scores matching the policy's assignment: the estimator
/// sums, over pairs i < j, the (a, b) slice with a = pi(X_i), b = pi(X_j),
/// and divides by (n choose 2).
pub fn policy_pair_mean(scores: &PairScoreSet, assign: &[bool]) -> f64 {
    let n = scores.n();
    let n_pairs = scores.n_pairs();
    let mut total = 0.0;
    for a in 0..2u8 {
        for b in 0..2u8 {
            let slice = scores.slice(a, b);
            let slice = slice.as_ref();
            total += par_chunk_sum(n_pairs, |p| {
                let (i, j) = pair_from_index(n, p);
                if assign[i] as u8 == a && assign[j] as u8 == b {
                    slice[p]
                } else {
                    0.0
                }
            });
        }
    }
    total / n_pairs as f64
}

/// Mean of the per-unit scores under the policy's assignment.
pub fn policy_linear_mean(s1: &[f64], s0: &[f64], assign: &[bool]) -> f64 {
    let n = assign.len();
    par_chunk_sum(n, |i| if assign[i] { s1[i] } else { s0[i] }) / n as f64
}

/// Estimated welfare of `policy` under the welfare spec that produced
/// `scores`. For the Kendall family the target enters here:
/// welfare = -|pair mean - t|.
pub fn estimate_welfare(
    data: &Dataset,
    scores: &ScoreSet,
    policy: &PolicyTree,
    spec: &WelfareSpec,
) -> Result<f64> {
    match (scores, spec.family.is_pair()) {
        (ScoreSet::Linear(lin), false) => {
            if lin.n() != data.n() {
                return Err(Error::Argument("scores and data sizes differ".into()));
            }
            let assign = policy.assign(data);
            Ok(policy_linear_mean(&lin.s1, &lin.s0, &assign))
        }
        (ScoreSet::Pair(pair), true) => {
            if pair.n() != data.n() {
                return Err(Error::Argument("scores and data sizes differ".into()));
            }
            let assign = policy.assign(data);
            let m = policy_pair_mean(pair, &assign);
            Ok(match spec.family {
                WelfareFamily::KendallTau { target } => -(m - target).abs(),
                _ => m,
            })
        }
        _ => Err(Error::Argument(
            "score set shape does not match the welfare family".into(),
        )),
    }
}
