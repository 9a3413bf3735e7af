//! Fold assignments for cross-fitting: unit-level groups for linear scores,
//! and square/triangle pair folds over the strict upper triangle for
//! pair scores. A square collects the within-group pairs of one group; a
//! triangle collects the cross pairs of two groups. Every pair's fold
//! excludes both of its endpoints' groups from that fold's training set.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::util::derived_rng;

/// A balanced partition of `{0..n}` into `L` groups (sizes differ by at
/// most one). Pure function of `(n, L, seed)`.
#[derive(Debug, Clone)]
pub struct FoldAssignment {
    group_of: Vec<u32>,
    groups: Vec<Vec<u32>>,
}

impl FoldAssignment {
    /// Build from explicit group membership lists (used by tests and by
    /// callers that need a fixed partition).
    pub fn from_groups(n: usize, groups: Vec<Vec<u32>>) -> Result<Self> {
        let mut group_of = vec![u32::MAX; n];
        for (g, members) in groups.iter().enumerate() {
            for &i in members {
                if i as usize >= n {
                    return Err(Error::Argument(format!("unit {i} out of range for n={n}")));
                }
                if group_of[i as usize] != u32::MAX {
                    return Err(Error::Argument(format!("unit {i} assigned twice")));
                }
                group_of[i as usize] = g as u32;
            }
        }
        if group_of.iter().any(|&g| g == u32::MAX) {
            return Err(Error::Argument("groups do not cover all units".into()));
        }
        let mut groups = groups;
        for g in &mut groups {
            g.sort_unstable();
        }
        Ok(FoldAssignment { group_of, groups })
    }

    pub fn n(&self) -> usize {
        self.group_of.len()
    }

    /// Number of groups L.
    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn group_of(&self, i: usize) -> usize {
        self.group_of[i] as usize
    }

    pub fn members(&self, g: usize) -> &[u32] {
        &self.groups[g]
    }

    /// Units outside group `g`, in index order.
    pub fn complement(&self, g: usize) -> Vec<u32> {
        (0..self.n() as u32).filter(|&i| self.group_of[i as usize] != g as u32).collect()
    }

    /// Units outside all groups in `excluded`, in index order.
    pub fn complement_of(&self, excluded: &[u32]) -> Vec<u32> {
        (0..self.n() as u32)
            .filter(|&i| !excluded.contains(&self.group_of[i as usize]))
            .collect()
    }
}

/// Split `{0..n}` into `l` groups of near-equal size, deterministically for
/// a fixed seed.
pub fn make_unit_folds(n: usize, l: usize, seed: u64) -> Result<FoldAssignment> {
    if l < 2 || l > n {
        return Err(Error::Argument(format!("need 2 <= L <= n, got L={l}, n={n}")));
    }
    let mut order: Vec<u32> = (0..n as u32).collect();
    let mut rng = derived_rng(seed, 0xF01D);
    order.shuffle(&mut rng);
    let mut groups: Vec<Vec<u32>> = vec![Vec::with_capacity(n / l + 1); l];
    for (pos, &i) in order.iter().enumerate() {
        groups[pos % l].push(i);
    }
    FoldAssignment::from_groups(n, groups)
}

/// Whether a pair fold is a within-group square or a cross-group triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairFoldKind {
    Square { group: u32 },
    Triangle { low: u32, high: u32 },
}

/// One fold of pairs plus the unit groups that must be excluded from the
/// training set of any nuisance used on this fold.
#[derive(Debug, Clone)]
pub struct PairFold {
    pub kind: PairFoldKind,
    pub excluded_groups: Vec<u32>,
}

/// A partition of `{(i,j): i < j}` into K squares and K(K-1)/2 triangles
/// derived from a unit-level partition.
#[derive(Debug, Clone)]
pub struct PairFoldAssignment {
    units: FoldAssignment,
    folds: Vec<PairFold>,
}

impl PairFoldAssignment {
    pub fn units(&self) -> &FoldAssignment {
        &self.units
    }

    pub fn folds(&self) -> &[PairFold] {
        &self.folds
    }

    pub fn n_folds(&self) -> usize {
        self.folds.len()
    }

    /// Fold id of the pair (i, j); O(1) from the endpoint groups.
    /// Squares occupy ids `0..K`, triangles follow in lexicographic
    /// (low, high) order.
    pub fn fold_of_pair(&self, i: usize, j: usize) -> usize {
        let k = self.units.n_groups();
        let (f, g) = (self.units.group_of(i), self.units.group_of(j));
        if f == g {
            f
        } else {
            let (lo, hi) = if f < g { (f, g) } else { (g, f) };
            k + lo * k - lo * (lo + 1) / 2 + (hi - lo - 1)
        }
    }

    /// Materialize the pairs of one fold, each normalized to i < j.
    pub fn pairs_in(&self, fold: usize) -> Vec<(u32, u32)> {
        match self.folds[fold].kind {
            PairFoldKind::Square { group } => {
                let m = self.units.members(group as usize);
                let mut out = Vec::with_capacity(m.len().saturating_sub(1) * m.len() / 2);
                for a in 0..m.len() {
                    for b in (a + 1)..m.len() {
                        out.push((m[a], m[b]));
                    }
                }
                out
            }
            PairFoldKind::Triangle { low, high } => {
                let ml = self.units.members(low as usize);
                let mh = self.units.members(high as usize);
                let mut out = Vec::with_capacity(ml.len() * mh.len());
                for &u in ml {
                    for &v in mh {
                        out.push(if u < v { (u, v) } else { (v, u) });
                    }
                }
                out.sort_unstable();
                out
            }
        }
    }
}

/// Derive the pair folds from a unit partition with K >= 2 groups.
pub fn make_pair_folds(units: FoldAssignment) -> Result<PairFoldAssignment> {
    let k = units.n_groups();
    if k < 2 {
        return Err(Error::Argument(format!("need at least 2 unit groups, got {k}")));
    }
    let mut folds = Vec::with_capacity(k + k * (k - 1) / 2);
    for g in 0..k as u32 {
        folds.push(PairFold { kind: PairFoldKind::Square { group: g }, excluded_groups: vec![g] });
    }
    for f in 0..k as u32 {
        for g in (f + 1)..k as u32 {
            folds.push(PairFold {
                kind: PairFoldKind::Triangle { low: f, high: g },
                excluded_groups: vec![f, g],
            });
        }
    }
    Ok(PairFoldAssignment { units, folds })
}
