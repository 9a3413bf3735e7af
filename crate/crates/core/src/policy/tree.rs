//! Depth-<=2 axis-aligned threshold trees and their exhaustive enumeration.

use std::collections::HashSet;

use super::grid::ThresholdGrid;
use crate::data::Dataset;
use crate::error::{Error, Result};

/// One axis-aligned split: x[feature] <= threshold goes left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
}

/// A complete threshold tree of depth 0, 1 or 2 mapping covariates to a
/// binary treatment decision. Evaluation is a pure function of the
/// covariate row.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyTree {
    Leaf { treat: bool },
    Depth1 { split: Split, leaves: [bool; 2] },
    Depth2 { root: Split, left: Split, right: Split, leaves: [bool; 4] },
}

/// Map f64 to a sort key preserving numeric order (total order via sign
/// flip), used for the lexicographic tree encoding.
fn ordered_bits(v: f64) -> u64 {
    let b = v.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

impl PolicyTree {
    pub fn depth(&self) -> u8 {
        match self {
            PolicyTree::Leaf { .. } => 0,
            PolicyTree::Depth1 { .. } => 1,
            PolicyTree::Depth2 { .. } => 2,
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            PolicyTree::Leaf { .. } => 1,
            PolicyTree::Depth1 { .. } => 2,
            PolicyTree::Depth2 { .. } => 4,
        }
    }

    /// Leaf index of unit `i` (left-to-right order).
    pub fn leaf_of(&self, data: &Dataset, i: usize) -> usize {
        match self {
            PolicyTree::Leaf { .. } => 0,
            PolicyTree::Depth1 { split, .. } => {
                usize::from(data.column(split.feature)[i] > split.threshold)
            }
            PolicyTree::Depth2 { root, left, right, .. } => {
                if data.column(root.feature)[i] <= root.threshold {
                    usize::from(data.column(left.feature)[i] > left.threshold)
                } else {
                    2 + usize::from(data.column(right.feature)[i] > right.threshold)
                }
            }
        }
    }

    pub fn leaf_action(&self, leaf: usize) -> bool {
        match self {
            PolicyTree::Leaf { treat } => *treat,
            PolicyTree::Depth1 { leaves, .. } => leaves[leaf],
            PolicyTree::Depth2 { leaves, .. } => leaves[leaf],
        }
    }

    /// Treatment decision for unit `i`.
    pub fn decide(&self, data: &Dataset, i: usize) -> bool {
        self.leaf_action(self.leaf_of(data, i))
    }

    /// Treatment assignment for every unit.
    pub fn assign(&self, data: &Dataset) -> Vec<bool> {
        (0..data.n()).map(|i| self.decide(data, i)).collect()
    }

    /// Deterministic lexicographic encoding used as the final tie-break in
    /// the optimizer: depth, then (feature, threshold) of each split in
    /// preorder, then the leaf-action bits.
    pub fn encoding(&self) -> Vec<u64> {
        let mut e = vec![self.depth() as u64];
        let push_split = |e: &mut Vec<u64>, s: &Split| {
            e.push(s.feature as u64);
            e.push(ordered_bits(s.threshold));
        };
        match self {
            PolicyTree::Leaf { treat } => e.push(*treat as u64),
            PolicyTree::Depth1 { split, leaves } => {
                push_split(&mut e, split);
                e.push(leaves.iter().enumerate().map(|(k, &b)| (b as u64) << k).sum());
            }
            PolicyTree::Depth2 { root, left, right, leaves } => {
                push_split(&mut e, root);
                push_split(&mut e, left);
                push_split(&mut e, right);
                e.push(leaves.iter().enumerate().map(|(k, &b)| (b as u64) << k).sum());
            }
        }
        e
    }

    /// Share of units assigned to treatment.
    pub fn share_treated(&self, data: &Dataset) -> f64 {
        self.assign(data).iter().filter(|&&t| t).count() as f64 / data.n() as f64
    }
}

fn leaves_from_bits<const K: usize>(bits: usize) -> [bool; K] {
    let mut out = [false; K];
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = (bits >> k) & 1 == 1;
    }
    out
}

/// Enumerate every complete tree of the given depth over the grid: all
/// (feature, cut) choices at each split crossed with all leaf labelings.
/// Depth 0 yields the two constant rules.
pub fn enumerate_trees(
    grid: &ThresholdGrid,
    depth: u8,
) -> Result<Box<dyn Iterator<Item = PolicyTree> + Send>> {
    if depth > 2 {
        return Err(Error::Argument(format!("depth must be 0, 1 or 2, got {depth}")));
    }
    let splits: Vec<Split> = grid
        .candidates()
        .into_iter()
        .map(|(slot, c)| Split { feature: grid.features()[slot], threshold: grid.cuts(slot)[c] })
        .collect();
    if splits.is_empty() {
        return Err(Error::Argument("empty threshold grid".into()));
    }
    match depth {
        0 => Ok(Box::new(
            [false, true].into_iter().map(|treat| PolicyTree::Leaf { treat }),
        )),
        1 => {
            let iter = splits.into_iter().flat_map(|split| {
                (0..4usize).map(move |bits| PolicyTree::Depth1 {
                    split,
                    leaves: leaves_from_bits::<2>(bits),
                })
            });
            Ok(Box::new(iter))
        }
        _ => {
            let all = splits;
            let iter = all.clone().into_iter().flat_map(move |root| {
                let all_l = all.clone();
                all_l.clone().into_iter().flat_map(move |left| {
                    let all_r = all_l.clone();
                    all_r.into_iter().flat_map(move |right| {
                        (0..16usize).map(move |bits| PolicyTree::Depth2 {
                            root,
                            left,
                            right,
                            leaves: leaves_from_bits::<4>(bits),
                        })
                    })
                })
            });
            Ok(Box::new(iter))
        }
    }
}

/// As [`enumerate_trees`] but dropping trees whose treatment assignment on
/// `data` coincides with one already produced.
pub fn enumerate_trees_dedup<'a>(
    grid: &ThresholdGrid,
    depth: u8,
    data: &'a Dataset,
) -> Result<Box<dyn Iterator<Item = PolicyTree> + 'a>> {
    let inner = enumerate_trees(grid, depth)?;
    let mut seen: HashSet<Vec<bool>> = HashSet::new();
    Ok(Box::new(inner.filter(move |t| seen.insert(t.assign(data)))))
}
