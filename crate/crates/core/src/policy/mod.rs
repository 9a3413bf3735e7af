//! Policy classes (depth-<=2 threshold trees), welfare estimation for a
//! fixed rule, exhaustive optimization, diagnostics and reports.

mod diagnostics;
mod grid;
mod optimize;
mod report;
mod tree;
mod welfare;

pub use diagnostics::{score_diagnostics, ScoreDiagnostics, SliceStats};
pub use grid::{build_grid, GridSpec, ThresholdGrid};
pub use optimize::optimize_policy;
pub use report::{
    estimate_ate, policy_report, render_tree, AteResult, LeafReport, PolicyEvaluation,
    ScoreBundle,
};
pub use tree::{enumerate_trees, enumerate_trees_dedup, PolicyTree, Split};
pub use welfare::{estimate_welfare, policy_linear_mean, policy_pair_mean};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::scores::{
        Identification, LinearScoreSet, PairScoreSet, ScoreSet, WelfareFamily, WelfareSpec,
    };
    use crate::util::derived_rng;
    use rand::Rng;

    fn toy(n: usize, seed: u64) -> Dataset {
        let mut rng = derived_rng(seed, 77);
        let x1: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let x2: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|i| 1.0 + x1[i]).collect();
        let d: Vec<u8> = (0..n).map(|_| rng.random_range(0..2) as u8).collect();
        Dataset::new(y, d, vec![x1, x2], vec!["x1".into(), "x2".into()], None, &[]).unwrap()
    }

    #[test]
    fn sign_scores_pick_the_known_split() {
        // s1 - s0 = sign(x1 - 0.5): the best depth-1 rule splits at 0.5 and
        // treats the right leaf. Checked against the explicit 4-tree class.
        let n = 64;
        let data = toy(n, 3);
        let s1: Vec<f64> =
            (0..n).map(|i| if data.column(0)[i] > 0.5 { 1.0 } else { -1.0 }).collect();
        let lin = LinearScoreSet { s1, s0: vec![0.0; n], clamped_share: 0.0 };
        let grid = ThresholdGrid::new(vec![0], vec![vec![0.25, 0.5, 0.75]]).unwrap();
        let spec = WelfareSpec::new(WelfareFamily::Additive, Identification::Dr).unwrap();
        let scores = ScoreSet::Linear(lin);
        let (tree, w) = optimize_policy(&data, &scores, &spec, &grid, 1).unwrap();
        match &tree {
            PolicyTree::Depth1 { split, leaves } => {
                assert_eq!(split.threshold, 0.5);
                assert_eq!(*leaves, [false, true]);
            }
            other => panic!("expected a depth-1 tree, got {other:?}"),
        }
        // Brute force over the class agrees.
        let mut best = f64::NEG_INFINITY;
        for t in enumerate_trees(&grid, 1).unwrap() {
            best = best.max(estimate_welfare(&data, &scores, &t, &spec).unwrap());
        }
        assert!((w - best).abs() < 1e-12);
    }

    #[test]
    fn all_negative_gains_treat_no_one() {
        let n = 30;
        let data = toy(n, 4);
        let lin = LinearScoreSet {
            s1: vec![0.0; n],
            s0: vec![1.0; n],
            clamped_share: 0.0,
        };
        let grid = ThresholdGrid::new(vec![0], vec![vec![0.5]]).unwrap();
        let spec = WelfareSpec::new(WelfareFamily::Additive, Identification::Dr).unwrap();
        let (tree, _) =
            optimize_policy(&data, &ScoreSet::Linear(lin), &spec, &grid, 0).unwrap();
        assert_eq!(tree, PolicyTree::Leaf { treat: false });
    }

    fn random_pair_scores(n: usize, seed: u64) -> PairScoreSet {
        let mut rng = derived_rng(seed, 11);
        let n_pairs = n * (n - 1) / 2;
        let mut tables: [Vec<f64>; 4] = Default::default();
        for t in tables.iter_mut() {
            // Dyadic values make every summation order exact.
            *t = (0..n_pairs).map(|_| (rng.random_range(-64i32..64) as f64) / 64.0).collect();
        }
        PairScoreSet::from_dense(tables, 0.0).unwrap()
    }

    #[test]
    fn optimizer_matches_brute_force_on_pair_scores() {
        for seed in 0..3u64 {
            let n = 24;
            let data = toy(n, 100 + seed);
            let scores = ScoreSet::Pair(random_pair_scores(n, seed));
            let grid = build_grid(&data, &[0, 1], GridSpec::Quantiles(3)).unwrap();
            let spec = WelfareSpec::new(WelfareFamily::Gini, Identification::Dr).unwrap();
            for depth in 0..=2u8 {
                let (tree, w) = optimize_policy(&data, &scores, &spec, &grid, depth).unwrap();
                // Independent brute force with the same tie-break.
                let mut best: Option<(f64, usize, Vec<u64>, PolicyTree)> = None;
                for t in enumerate_trees(&grid, depth).unwrap() {
                    let wt = estimate_welfare(&data, &scores, &t, &spec).unwrap();
                    let treated = t.assign(&data).iter().filter(|&&b| b).count();
                    let enc = t.encoding();
                    let better = match &best {
                        None => true,
                        Some((bw, bt, benc, _)) => {
                            wt > *bw
                                || (wt == *bw && treated < *bt)
                                || (wt == *bw && treated == *bt && enc < *benc)
                        }
                    };
                    if better {
                        best = Some((wt, treated, enc, t));
                    }
                }
                let (bw, _, _, btree) = best.unwrap();
                assert!(
                    (w - bw).abs() <= 1e-12 * bw.abs().max(1.0),
                    "depth {depth} seed {seed}: {w} vs {bw}"
                );
                assert_eq!(tree, btree, "depth {depth} seed {seed}");
            }
        }
    }

    #[test]
    fn optimizer_invariant_to_row_permutation() {
        // Dyadic scores keep all sums exact, so the same tree must win
        // after any row permutation.
        let n = 40;
        let data = toy(n, 8);
        let scores_tables = {
            let mut rng = derived_rng(5, 6);
            let n_pairs = n * (n - 1) / 2;
            let mut tables: [Vec<f64>; 4] = Default::default();
            for t in tables.iter_mut() {
                *t = (0..n_pairs)
                    .map(|_| (rng.random_range(-16i32..16) as f64) / 16.0)
                    .collect();
            }
            tables
        };
        let grid = build_grid(&data, &[0], GridSpec::Quantiles(4)).unwrap();
        let spec = WelfareSpec::new(WelfareFamily::Gini, Identification::Dr).unwrap();

        // Permute rows (reverse) and remap the pair tables accordingly.
        let perm: Vec<usize> = (0..n).rev().collect();
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let data_perm = Dataset::new(
            perm.iter().map(|&i| data.outcome()[i]).collect(),
            perm.iter().map(|&i| data.treatment()[i]).collect(),
            vec![
                perm.iter().map(|&i| data.column(0)[i]).collect(),
                perm.iter().map(|&i| data.column(1)[i]).collect(),
            ],
            vec!["x1".into(), "x2".into()],
            None,
            &[],
        )
        .unwrap();
        let mut tables_perm: [Vec<f64>; 4] = Default::default();
        let n_pairs = n * (n - 1) / 2;
        for a in 0..2usize {
            for b in 0..2usize {
                let mut t = vec![0.0; n_pairs];
                for p in 0..n_pairs {
                    let (i, j) = crate::ustat::pair_from_index(n, p);
                    let (ni, nj) = (inv[i], inv[j]);
                    // Swapping endpoints swaps the (a, b) slots.
                    let (q, slot) = if ni < nj {
                        (crate::ustat::pair_index(n, ni, nj), a * 2 + b)
                    } else {
                        (crate::ustat::pair_index(n, nj, ni), b * 2 + a)
                    };
                    t[q] = scores_tables[slot][p];
                }
                tables_perm[a * 2 + b] = t;
            }
        }
        // tables_perm was built by writing slot (a,b) of the new indexing:
        // entry q of the new (a,b) slice equals the old value with slots
        // swapped when the pair flipped.
        let scores = ScoreSet::Pair(PairScoreSet::from_dense(scores_tables, 0.0).unwrap());
        let scores_perm =
            ScoreSet::Pair(PairScoreSet::from_dense(tables_perm, 0.0).unwrap());
        let (tree_a, w_a) = optimize_policy(&data, &scores, &spec, &grid, 1).unwrap();
        let (tree_b, w_b) =
            optimize_policy(&data_perm, &scores_perm, &spec, &grid, 1).unwrap();
        assert_eq!(tree_a, tree_b);
        assert_eq!(w_a, w_b);
    }
}
