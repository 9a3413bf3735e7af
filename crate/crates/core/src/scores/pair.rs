//! Per-pair orthogonal scores for the U-statistic welfare families: Gini,
//! IOp-Gini and Kendall-tau. Every pair (i, j), i < j, carries four scores,
//! one per treatment combination (a, b); the welfare of a rule is the pair
//! mean of the score matching the rule's assignment of i and j.
//!
//! Scores are materialized densely up to a pair budget; above it each
//! (a, b) slice is evaluated on demand from the cached nuisance values.

use std::borrow::Cow;
use std::sync::Arc;

use rayon::prelude::*;

use super::Identification;
use crate::data::{Dataset, PairFoldAssignment};
use crate::error::{Error, Result};
use crate::ustat::{gini_kernel, pair_from_index};
use crate::util::sgn;

/// Per-unit nuisance values indexed by pair fold: either one shared vector
/// (oracle values, identical in every fold) or one vector per fold.
#[derive(Debug, Clone)]
pub enum FoldValues {
    Shared(Vec<f64>),
    PerFold(Vec<Vec<f64>>),
}

impl FoldValues {
    fn get(&self, fold: usize, unit: usize) -> f64 {
        match self {
            FoldValues::Shared(v) => v[unit],
            FoldValues::PerFold(byf) => byf[fold][unit],
        }
    }
}

/// Nuisance values backing pair scores: clamped propensities, optionally
/// circumstance outcome means (IOp kernel), optionally the pairwise
/// conditional means phi (Gini and Kendall kernels), and the pair fold
/// assignment that routes each pair to the fit that excludes it.
#[derive(Debug, Clone)]
pub struct PairNuisances {
    folds: Option<PairFoldAssignment>,
    e: FoldValues,
    gamma1: Option<FoldValues>,
    gamma0: Option<FoldValues>,
    /// phi_ab(X_i, X_j) per pair index, slot layout a*2 + b.
    phi: Option<[Vec<f64>; 4]>,
    clamp_share: f64,
}

impl PairNuisances {
    /// Oracle nuisances: one value per unit, no cross-fitting.
    pub fn from_oracle(
        e: Vec<f64>,
        gamma: Option<(Vec<f64>, Vec<f64>)>,
        phi: Option<[Vec<f64>; 4]>,
    ) -> Self {
        let (gamma1, gamma0) = match gamma {
            Some((g1, g0)) => (Some(FoldValues::Shared(g1)), Some(FoldValues::Shared(g0))),
            None => (None, None),
        };
        PairNuisances { folds: None, e: FoldValues::Shared(e), gamma1, gamma0, phi, clamp_share: 0.0 }
    }

    /// Cross-fitted nuisances, one fit per pair fold.
    pub fn from_fits(
        folds: PairFoldAssignment,
        e: Vec<Vec<f64>>,
        gamma: Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)>,
        phi: Option<[Vec<f64>; 4]>,
        clamp_share: f64,
    ) -> Self {
        let (gamma1, gamma0) = match gamma {
            Some((g1, g0)) => (Some(FoldValues::PerFold(g1)), Some(FoldValues::PerFold(g0))),
            None => (None, None),
        };
        PairNuisances {
            folds: Some(folds),
            e: FoldValues::PerFold(e),
            gamma1,
            gamma0,
            phi,
            clamp_share,
        }
    }

    pub fn clamp_share(&self) -> f64 {
        self.clamp_share
    }

    pub fn phi(&self) -> Option<&[Vec<f64>; 4]> {
        self.phi.as_ref()
    }

    /// Pair fold owning (i, j); 0 when the values are shared (oracle).
    pub fn fold_of_pair(&self, i: usize, j: usize) -> usize {
        self.folds.as_ref().map_or(0, |f| f.fold_of_pair(i, j))
    }

    /// Propensity of arm `a` for `unit` under the fit of `fold`.
    pub fn e_for(&self, fold: usize, unit: usize, arm: u8) -> f64 {
        let e1 = self.e.get(fold, unit);
        if arm == 1 {
            e1
        } else {
            1.0 - e1
        }
    }

    /// gamma(arm, X_unit) under the fit of `fold`.
    pub fn gamma_for(&self, fold: usize, unit: usize, arm: u8) -> f64 {
        let g = if arm == 1 { self.gamma1.as_ref() } else { self.gamma0.as_ref() };
        g.expect("gamma values present").get(fold, unit)
    }
}

/// Which pairwise kernel the scores implement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PairKernelKind {
    /// g = (Y_i + Y_j - |Y_i - Y_j|) / 2 with phi fitted on the outcome pairs.
    GiniMin,
    /// g = sgn(X1_i - X1_j) sgn(Y_i - Y_j) with phi fitted on the sign pairs.
    KendallSign,
    /// g = min of the circumstance predictions; no phi, scores built from
    /// gamma and e with the sign-weighted residual terms.
    IopMin,
}

/// Evaluates score slices on demand from cached nuisance values.
pub trait PairScoreSource: Send + Sync {
    fn n(&self) -> usize;
    /// Materialize the (a, b) slice over all pairs i < j.
    fn eval_slice(&self, a: u8, b: u8) -> Vec<f64>;
}

struct OrthSource {
    y: Vec<f64>,
    d: Vec<u8>,
    x1: Option<Vec<f64>>,
    nuis: Arc<PairNuisances>,
    kind: PairKernelKind,
    ident: Identification,
}

impl OrthSource {
    fn kernel(&self, i: usize, j: usize) -> f64 {
        match self.kind {
            PairKernelKind::GiniMin => gini_kernel(self.y[i], self.y[j]),
            PairKernelKind::KendallSign => {
                let x1 = self.x1.as_ref().expect("x1 present");
                sgn(x1[i] - x1[j]) * sgn(self.y[i] - self.y[j])
            }
            PairKernelKind::IopMin => unreachable!("IOp kernel handled separately"),
        }
    }

    fn score(&self, p: usize, a: u8, b: u8) -> f64 {
        let n = self.y.len();
        let (i, j) = pair_from_index(n, p);
        let fold = self.nuis.fold_of_pair(i, j);
        let e_a = self.nuis.e_for(fold, i, a);
        let e_b = self.nuis.e_for(fold, j, b);
        let slot = (a * 2 + b) as usize;
        match self.kind {
            PairKernelKind::IopMin => {
                let ga = self.nuis.gamma_for(fold, i, a);
                let gb = self.nuis.gamma_for(fold, j, b);
                let base = gini_kernel(ga, gb);
                match self.ident {
                    Identification::Dm => base,
                    Identification::Ipw => {
                        let ind = (self.d[i] == a && self.d[j] == b) as u8 as f64;
                        base * ind / (e_a * e_b)
                    }
                    Identification::Dr => {
                        let delta = sgn(ga - gb);
                        let ind_i = (self.d[i] == a) as u8 as f64;
                        let ind_j = (self.d[j] == b) as u8 as f64;
                        let r_i = self.y[i] - self.nuis.gamma_for(fold, i, self.d[i]);
                        let r_j = self.y[j] - self.nuis.gamma_for(fold, j, self.d[j]);
                        base + 0.5
                            * (ind_i / e_a * (1.0 - delta) * r_i
                                + ind_j / e_b * (1.0 + delta) * r_j)
                    }
                }
            }
            _ => match self.ident {
                Identification::Ipw => {
                    let ind = (self.d[i] == a && self.d[j] == b) as u8 as f64;
                    ind * self.kernel(i, j) / (e_a * e_b)
                }
                Identification::Dm => self.nuis.phi.as_ref().expect("phi present")[slot][p],
                Identification::Dr => {
                    let phi_p = self.nuis.phi.as_ref().expect("phi present")[slot][p];
                    let ind = (self.d[i] == a && self.d[j] == b) as u8 as f64;
                    phi_p + ind / (e_a * e_b) * (self.kernel(i, j) - phi_p)
                }
            },
        }
    }
}

impl PairScoreSource for OrthSource {
    fn n(&self) -> usize {
        self.y.len()
    }

    fn eval_slice(&self, a: u8, b: u8) -> Vec<f64> {
        let n_pairs = self.y.len() * (self.y.len() - 1) / 2;
        (0..n_pairs).into_par_iter().map(|p| self.score(p, a, b)).collect()
    }
}

#[derive(Clone)]
enum Repr {
    Dense(Arc<[Vec<f64>; 4]>),
    Lazy(Arc<dyn PairScoreSource>),
}

/// Scores Gamma_ij^{ab} for every pair i < j and treatment combination.
#[derive(Clone)]
pub struct PairScoreSet {
    n: usize,
    clamped_share: f64,
    repr: Repr,
}

impl PairScoreSet {
    /// Above this many pairs the four (a, b) slices are evaluated on demand
    /// instead of being held in memory together.
    pub const DENSE_PAIR_BUDGET: usize = 5_000_000;

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_pairs(&self) -> usize {
        self.n * (self.n - 1) / 2
    }

    pub fn clamped_share(&self) -> f64 {
        self.clamped_share
    }

    /// The (a, b) slice over all pairs: borrowed when dense, materialized
    /// transiently when lazy.
    pub fn slice(&self, a: u8, b: u8) -> Cow<'_, [f64]> {
        match &self.repr {
            Repr::Dense(t) => Cow::Borrowed(&t[(a * 2 + b) as usize]),
            Repr::Lazy(src) => Cow::Owned(src.eval_slice(a, b)),
        }
    }

    /// Build from explicit dense slices (slot layout a*2 + b).
    pub fn from_dense(tables: [Vec<f64>; 4], clamped_share: f64) -> Result<Self> {
        let n_pairs = tables[0].len();
        if tables.iter().any(|t| t.len() != n_pairs) {
            return Err(Error::Argument("score slices of unequal length".into()));
        }
        // Invert n(n-1)/2.
        let n = (0.5 + (0.25 + 2.0 * n_pairs as f64).sqrt()) as usize;
        if n * (n - 1) / 2 != n_pairs {
            return Err(Error::Argument(format!(
                "{n_pairs} scores is not a full upper triangle"
            )));
        }
        Ok(PairScoreSet { n, clamped_share, repr: Repr::Dense(Arc::new(tables)) })
    }

    fn from_source(src: Arc<dyn PairScoreSource>, clamped_share: f64) -> Self {
        let n = src.n();
        let n_pairs = n * (n - 1) / 2;
        if n_pairs <= Self::DENSE_PAIR_BUDGET {
            let tables = [
                src.eval_slice(0, 0),
                src.eval_slice(0, 1),
                src.eval_slice(1, 0),
                src.eval_slice(1, 1),
            ];
            PairScoreSet { n, clamped_share, repr: Repr::Dense(Arc::new(tables)) }
        } else {
            PairScoreSet { n, clamped_share, repr: Repr::Lazy(src) }
        }
    }
}

fn build(
    data: &Dataset,
    nuis: Arc<PairNuisances>,
    kind: PairKernelKind,
    ident: Identification,
) -> Result<PairScoreSet> {
    if data.n() < 2 {
        return Err(Error::Argument("pair scores need at least 2 units".into()));
    }
    match kind {
        PairKernelKind::GiniMin | PairKernelKind::KendallSign => {
            if nuis.phi.is_none() && ident != Identification::Ipw {
                return Err(Error::Estimation(
                    "pair scores need fitted phi values for this family".into(),
                ));
            }
            if kind == PairKernelKind::KendallSign && data.parental_outcome().is_none() {
                return Err(Error::Config(
                    "kendall_tau welfare requires a parental outcome column".into(),
                ));
            }
        }
        PairKernelKind::IopMin => {
            if nuis.gamma1.is_none() || nuis.gamma0.is_none() {
                return Err(Error::Estimation(
                    "IOp pair scores need fitted circumstance outcome means".into(),
                ));
            }
        }
    }
    let clamp = nuis.clamp_share;
    let src = OrthSource {
        y: data.outcome().to_vec(),
        d: data.treatment().to_vec(),
        x1: data.parental_outcome().map(|v| v.to_vec()),
        nuis,
        kind,
        ident,
    };
    Ok(PairScoreSet::from_source(Arc::new(src), clamp))
}

/// Doubly-robust (or DM/IPW) pair scores for the Gini welfare.
pub fn gini_scores(
    data: &Dataset,
    nuis: Arc<PairNuisances>,
    ident: Identification,
) -> Result<PairScoreSet> {
    build(data, nuis, PairKernelKind::GiniMin, ident)
}

/// Pair scores for the IOp-Gini welfare: the min of the circumstance
/// predictions plus sign-weighted inverse-propensity residual terms.
pub fn iop_gini_scores(
    data: &Dataset,
    nuis: Arc<PairNuisances>,
    ident: Identification,
) -> Result<PairScoreSet> {
    build(data, nuis, PairKernelKind::IopMin, ident)
}

/// Pair scores for the Kendall-tau sign kernel. The target t enters at
/// welfare-evaluation time, not here, so the score set stays linear in the
/// pair distribution.
pub fn kendall_scores(
    data: &Dataset,
    nuis: Arc<PairNuisances>,
    ident: Identification,
) -> Result<PairScoreSet> {
    build(data, nuis, PairKernelKind::KendallSign, ident)
}
