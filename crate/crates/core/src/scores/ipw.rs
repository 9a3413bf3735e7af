//! Orthogonalized scores built on the inverse-propensity identification:
//! the plug-in IPW kernel plus propensity correction terms. Implemented for
//! the additive and Gini families, whose propensity correction weights have
//! closed forms in the fitted conditional means; the two routes (this one
//! and the direct-method orthogonal scores) estimate the same welfare and
//! serve as an agreement check on each other.

use std::sync::Arc;

use rayon::prelude::*;

use super::{LinearNuisances, LinearScoreSet, PairNuisances, PairScoreSet};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::ustat::{gini_kernel, pair_from_index, pair_index};

/// Additive-welfare scores on the IPW route with the propensity correction
/// `alpha^e(X)(1(D=a) - e_a(X))`, `alpha^e = -gamma_a(X)/e_a(X)`. Algebra
/// collapses this to the AIPW form, so it must agree with the DR route up
/// to floating-point rounding.
pub fn additive_scores_ipw_orth(data: &Dataset, nuis: &LinearNuisances) -> LinearScoreSet {
    let n = data.n();
    let y = data.outcome();
    let d = data.treatment();
    let mut s1 = Vec::with_capacity(n);
    let mut s0 = Vec::with_capacity(n);
    for i in 0..n {
        let di = d[i] as f64;
        let (e1, e0) = (nuis.e[i], 1.0 - nuis.e[i]);
        let base1 = di * y[i] / e1;
        let corr1 = -(nuis.gamma1[i] / e1) * (di - e1);
        s1.push(base1 + corr1);
        let base0 = (1.0 - di) * y[i] / e0;
        let corr0 = -(nuis.gamma0[i] / e0) * ((1.0 - di) - e0);
        s0.push(base0 + corr0);
    }
    LinearScoreSet { s1, s0, clamped_share: nuis.clamp_share }
}

/// Gini pair scores on the IPW route: the plug-in weighted kernel plus the
/// two propensity corrections of the product weight, with
/// `alpha_1(X_i) = -E[phi_ab(X_i, X_j)] / e_a(X_i)` (and symmetrically for
/// the second slot). The conditional expectations are estimated by
/// averaging the cross-fitted phi values over the other units, relying on
/// the symmetry of the Gini kernel.
pub fn gini_scores_ipw_orth(data: &Dataset, nuis: Arc<PairNuisances>) -> Result<PairScoreSet> {
    let n = data.n();
    let n_pairs = n * (n - 1) / 2;
    let phi = nuis
        .phi()
        .ok_or_else(|| Error::Estimation("IPW-orthogonal Gini scores need fitted phi".into()))?;
    if n_pairs > PairScoreSet::DENSE_PAIR_BUDGET {
        return Err(Error::Argument(format!(
            "IPW-orthogonal Gini scores need the dense representation; \
             {n_pairs} pairs exceeds the budget of {}",
            PairScoreSet::DENSE_PAIR_BUDGET
        )));
    }

    // Row means of phi_ab over the partner unit. For v < i the value
    // phi_ab(X_i, X_v) is stored in the (b, a) slice of pair (v, i).
    let mut row_mean = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for a in 0..2usize {
        for b in 0..2usize {
            let fwd = &phi[a * 2 + b];
            let rev = &phi[b * 2 + a];
            let means: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut acc = 0.0;
                    for v in 0..n {
                        if v == i {
                            continue;
                        }
                        acc += if i < v { fwd[pair_index(n, i, v)] } else { rev[pair_index(n, v, i)] };
                    }
                    acc / (n as f64 - 1.0)
                })
                .collect();
            row_mean[a * 2 + b] = means;
        }
    }

    let y = data.outcome();
    let d = data.treatment();
    let mut tables: [Vec<f64>; 4] = Default::default();
    for a in 0..2u8 {
        for b in 0..2u8 {
            let slot = (a * 2 + b) as usize;
            let rm = &row_mean[slot];
            let nuis = Arc::clone(&nuis);
            let vals: Vec<f64> = (0..n_pairs)
                .into_par_iter()
                .map(|p| {
                    let (i, j) = pair_from_index(n, p);
                    let fold = nuis_fold(&nuis, i, j);
                    let e_a = nuis_e(&nuis, fold, i, a);
                    let e_b = nuis_e(&nuis, fold, j, b);
                    let ind_i = (d[i] == a) as u8 as f64;
                    let ind_j = (d[j] == b) as u8 as f64;
                    let base = ind_i * ind_j * gini_kernel(y[i], y[j]) / (e_a * e_b);
                    let corr_i = -(rm[i] / e_a) * (ind_i - e_a);
                    let corr_j = -(rm[j] / e_b) * (ind_j - e_b);
                    base + corr_i + corr_j
                })
                .collect();
            tables[slot] = vals;
        }
    }
    PairScoreSet::from_dense(tables, nuis.clamp_share())
}

fn nuis_fold(nuis: &PairNuisances, i: usize, j: usize) -> usize {
    // Delegated through a free function to keep the hot closure small.
    nuis.fold_of_pair(i, j)
}

fn nuis_e(nuis: &PairNuisances, fold: usize, unit: usize, arm: u8) -> f64 {
    nuis.e_for(fold, unit, arm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scores::{additive_scores, Identification};

    #[test]
    fn ipw_orth_additive_equals_aipw() {
        let n = 30;
        let y: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.37).sin().abs()).collect();
        let d: Vec<u8> = (0..n).map(|i| ((i * 13) % 3 != 0) as u8).collect();
        let x: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let data =
            Dataset::new(y, d, vec![x.clone()], vec!["x1".into()], None, &[]).unwrap();
        let nuis = LinearNuisances::from_oracle(
            x.iter().map(|v| v + 1.0).collect(),
            x.clone(),
            (0..n)
                .map(|i| x[i] + data.treatment()[i] as f64)
                .collect(),
            x.iter().map(|v| 0.25 + 0.5 * v).collect(),
        );
        let a = additive_scores(&data, &nuis, Identification::Dr).unwrap();
        let b = additive_scores_ipw_orth(&data, &nuis);
        for i in 0..n {
            assert!((a.s1[i] - b.s1[i]).abs() < 1e-12);
            assert!((a.s0[i] - b.s0[i]).abs() < 1e-12);
        }
    }
}
