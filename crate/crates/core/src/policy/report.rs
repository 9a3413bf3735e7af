//! Policy evaluation reports: counterfactual summary statistics under a
//! rule, per-leaf annotations, the ASCII tree rendering, and the AIPW
//! average treatment effect.

use serde::Serialize;

use super::tree::PolicyTree;
use super::welfare::{policy_linear_mean, policy_pair_mean};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scores::{LinearScoreSet, PairScoreSet};
use crate::util::{mean, sample_sd, two_sided_p};

/// AIPW average treatment effect with its plug-in standard error and
/// two-sided normal p-value.
#[derive(Debug, Clone, Serialize)]
pub struct AteResult {
    pub ate: f64,
    pub se: f64,
    pub p_value: f64,
}

/// ATE from additive linear scores: the mean of s1 - s0.
pub fn estimate_ate(scores: &LinearScoreSet) -> AteResult {
    let n = scores.n();
    let diffs: Vec<f64> = (0..n).map(|i| scores.s1[i] - scores.s0[i]).collect();
    let ate = mean(&diffs);
    let se = sample_sd(&diffs) / (n as f64).sqrt();
    let p_value = if se > 0.0 {
        two_sided_p(ate / se)
    } else if ate == 0.0 {
        1.0
    } else {
        0.0
    };
    AteResult { ate, se, p_value }
}

/// One terminal node of a policy tree with the annotations reported at the
/// leaves: unit count, the conditional average treatment effect, and the
/// observed treated share.
#[derive(Debug, Clone, Serialize)]
pub struct LeafReport {
    pub action: bool,
    pub n: usize,
    pub cate: f64,
    pub observed_treated_share: f64,
}

/// Counterfactual summary of a policy: welfare under the driving family
/// plus the mean, Gini, IOp, Kendall-tau and treated share implied by the
/// score sets.
#[derive(Debug, Clone, Serialize)]
pub struct PolicyEvaluation {
    pub welfare: f64,
    pub mean: f64,
    pub gini: f64,
    pub iop: f64,
    pub kendall_tau: Option<f64>,
    pub share_treated: f64,
    pub leaves: Vec<LeafReport>,
}

/// Score sets for the summary columns, one per reported statistic.
pub struct ScoreBundle {
    /// Additive AIPW scores (drives mean and leaf CATEs).
    pub additive: LinearScoreSet,
    /// Gini-family pair scores.
    pub gini: PairScoreSet,
    /// IOp-Gini pair scores.
    pub iop: PairScoreSet,
    /// Kendall pair scores, when a parental outcome is available.
    pub kendall: Option<PairScoreSet>,
}

/// Evaluate a policy: `welfare` is the caller-computed welfare under the
/// driving family; the summary columns come from the bundle's score sets.
pub fn policy_report(
    data: &Dataset,
    bundle: &ScoreBundle,
    policy: &PolicyTree,
    welfare: f64,
) -> Result<PolicyEvaluation> {
    let assign = policy.assign(data);
    let mean_pi = policy_linear_mean(&bundle.additive.s1, &bundle.additive.s0, &assign);
    if !(mean_pi > 0.0) {
        return Err(Error::Numeric(format!(
            "counterfactual mean {mean_pi} is not positive; Gini-type indices undefined"
        )));
    }
    // W_gini(pi) = mean_pi * (1 - G(pi)) identifies the index as a ratio.
    let w_gini = policy_pair_mean(&bundle.gini, &assign);
    let w_iop = policy_pair_mean(&bundle.iop, &assign);
    let kendall_tau = bundle.kendall.as_ref().map(|k| policy_pair_mean(k, &assign));
    let share_treated = assign.iter().filter(|&&t| t).count() as f64 / data.n() as f64;

    let n_leaves = policy.n_leaves();
    let mut leaves = Vec::with_capacity(n_leaves);
    for leaf in 0..n_leaves {
        let members: Vec<usize> =
            (0..data.n()).filter(|&i| policy.leaf_of(data, i) == leaf).collect();
        let n = members.len();
        let cate = if n == 0 {
            0.0
        } else {
            members
                .iter()
                .map(|&i| bundle.additive.s1[i] - bundle.additive.s0[i])
                .sum::<f64>()
                / n as f64
        };
        let observed = if n == 0 {
            0.0
        } else {
            members.iter().filter(|&&i| data.treatment()[i] == 1).count() as f64 / n as f64
        };
        leaves.push(LeafReport {
            action: policy.leaf_action(leaf),
            n,
            cate,
            observed_treated_share: observed,
        });
    }

    Ok(PolicyEvaluation {
        welfare,
        mean: mean_pi,
        gini: 1.0 - w_gini / mean_pi,
        iop: 1.0 - w_iop / mean_pi,
        kendall_tau,
        share_treated,
        leaves,
    })
}

fn leaf_line(leaf: &LeafReport) -> String {
    format!(
        "{} [n={} cate={:.4} phat={:.3}]",
        if leaf.action { "treat" } else { "no treat" },
        leaf.n,
        leaf.cate,
        leaf.observed_treated_share
    )
}

/// Render the tree with per-leaf annotations (unit count, CATE, observed
/// treated share), pure ASCII.
pub fn render_tree(policy: &PolicyTree, names: &[String], leaves: &[LeafReport]) -> String {
    let name = |f: usize| -> &str { names.get(f).map(String::as_str).unwrap_or("?") };
    match policy {
        PolicyTree::Leaf { .. } => leaf_line(&leaves[0]),
        PolicyTree::Depth1 { split, .. } => {
            let mut out = String::new();
            out.push_str(&format!("{} <= {:.6}?\n", name(split.feature), split.threshold));
            out.push_str(&format!("|-- yes: {}\n", leaf_line(&leaves[0])));
            out.push_str(&format!("`-- no:  {}", leaf_line(&leaves[1])));
            out
        }
        PolicyTree::Depth2 { root, left, right, .. } => {
            let mut out = String::new();
            out.push_str(&format!("{} <= {:.6}?\n", name(root.feature), root.threshold));
            out.push_str(&format!("|-- yes: {} <= {:.6}?\n", name(left.feature), left.threshold));
            out.push_str(&format!("|   |-- yes: {}\n", leaf_line(&leaves[0])));
            out.push_str(&format!("|   `-- no:  {}\n", leaf_line(&leaves[1])));
            out.push_str(&format!("`-- no:  {} <= {:.6}?\n", name(right.feature), right.threshold));
            out.push_str(&format!("    |-- yes: {}\n", leaf_line(&leaves[2])));
            out.push_str(&format!("    `-- no:  {}", leaf_line(&leaves[3])));
            out
        }
    }
}
