//! Score diagnostics: per-slice second moments (the quantity entering the
//! regret bound), ranges and the propensity clamp share.

use serde::Serialize;

use crate::scores::ScoreSet;
use crate::util::par_chunk_sum;

/// Summary of one score slice.
#[derive(Debug, Clone, Serialize)]
pub struct SliceStats {
    pub label: String,
    /// Mean of the squared scores.
    pub second_moment: f64,
    pub min: f64,
    pub max: f64,
}

fn stats(label: &str, xs: &[f64]) -> SliceStats {
    let n = xs.len().max(1);
    let second_moment = par_chunk_sum(xs.len(), |i| xs[i] * xs[i]) / n as f64;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in xs {
        min = min.min(v);
        max = max.max(v);
    }
    SliceStats { label: label.into(), second_moment, min, max }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScoreDiagnostics {
    pub slices: Vec<SliceStats>,
    /// Share of raw propensity predictions clamped by trimming.
    pub clamped_share: f64,
}

/// Second moments S = E[Gamma^2] per slice (per arm for linear scores, per
/// treatment combination for pair scores), min/max, and the clamp share.
pub fn score_diagnostics(scores: &ScoreSet) -> ScoreDiagnostics {
    let slices = match scores {
        ScoreSet::Linear(lin) => {
            vec![stats("s1", &lin.s1), stats("s0", &lin.s0)]
        }
        ScoreSet::Pair(pair) => (0..4u8)
            .map(|ab| {
                let (a, b) = (ab / 2, ab % 2);
                let slice = pair.slice(a, b);
                stats(&format!("ab={a}{b}"), slice.as_ref())
            })
            .collect(),
    };
    ScoreDiagnostics { slices, clamped_share: scores.clamped_share() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scores::LinearScoreSet;

    #[test]
    fn constant_scores_have_squared_second_moment() {
        let lin = LinearScoreSet { s1: vec![3.0; 10], s0: vec![-2.0; 10], clamped_share: 0.0 };
        let d = score_diagnostics(&ScoreSet::Linear(lin));
        assert!((d.slices[0].second_moment - 9.0).abs() < 1e-12);
        assert!((d.slices[1].second_moment - 4.0).abs() < 1e-12);
        assert_eq!(d.slices[0].min, 3.0);
        assert_eq!(d.slices[0].max, 3.0);
    }
}
