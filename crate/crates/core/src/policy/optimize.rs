//! Exhaustive policy search over complete threshold trees.
//!
//! There are no search shortcuts: the sub-trees of the pairwise welfare are
//! not independent optimization problems, so every (root, left, right, leaf
//! labeling) combination is scored. To keep that affordable the pair-score
//! sum of each (a, b) slice is pre-aggregated over grid-cell pairs once;
//! scoring a tree then costs O(cells^2), not O(n^2).

use rayon::prelude::*;

use super::grid::ThresholdGrid;
use super::tree::{PolicyTree, Split};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scores::{ScoreSet, WelfareFamily, WelfareSpec};
use crate::ustat::pair_from_index;

/// Cap on grid cells for the pairwise cell-pair aggregation (cells^2 floats
/// per treatment combination).
const PAIR_CELL_CAP: usize = 1024;
/// Cap on grid cells for the linear aggregation.
const LINEAR_CELL_CAP: usize = 1 << 20;

/// Grid-cell assignment: the cross product of per-feature bins induced by
/// the candidate cuts. A tree built from grid cuts is constant on cells.
struct CellIndex {
    /// Cell id per unit.
    cell_of: Vec<u32>,
    /// Bin of each cell in each grid slot.
    cell_bins: Vec<Vec<u16>>,
    n_cells: usize,
}

fn build_cells(data: &Dataset, grid: &ThresholdGrid) -> Result<CellIndex> {
    let slots = grid.n_slots();
    let mut dims = Vec::with_capacity(slots);
    for s in 0..slots {
        dims.push(grid.cuts(s).len() + 1);
    }
    let n_cells = dims.iter().product::<usize>();
    let n = data.n();
    let mut cell_of = vec![0u32; n];
    for s in 0..slots {
        let cuts = grid.cuts(s);
        let col = data.column(grid.features()[s]);
        for i in 0..n {
            // bin = number of cuts strictly below x; x <= cut[c] iff bin <= c.
            let bin = cuts.partition_point(|&c| c < col[i]);
            cell_of[i] = cell_of[i] * dims[s] as u32 + bin as u32;
        }
    }
    let mut cell_bins = vec![vec![0u16; n_cells]; slots];
    for cell in 0..n_cells {
        let mut rest = cell;
        for s in (0..slots).rev() {
            cell_bins[s][cell] = (rest % dims[s]) as u16;
            rest /= dims[s];
        }
    }
    Ok(CellIndex { cell_of, cell_bins, n_cells })
}

/// A candidate split as (slot, cut index), ordered by (feature, threshold)
/// so that iteration order matches the lexicographic tree encoding.
#[derive(Clone, Copy)]
struct Candidate {
    slot: usize,
    cut: usize,
    split: Split,
}

fn sorted_candidates(grid: &ThresholdGrid) -> Vec<Candidate> {
    let mut cands: Vec<Candidate> = grid
        .candidates()
        .into_iter()
        .map(|(slot, cut)| Candidate {
            slot,
            cut,
            split: Split { feature: grid.features()[slot], threshold: grid.cuts(slot)[cut] },
        })
        .collect();
    cands.sort_by(|a, b| {
        a.split
            .feature
            .cmp(&b.split.feature)
            .then(a.split.threshold.partial_cmp(&b.split.threshold).unwrap())
    });
    cands
}

/// Per-cell side of a candidate split: false = left (bin <= cut).
fn side_of_cells(cells: &CellIndex, cand: &Candidate) -> Vec<bool> {
    cells.cell_bins[cand.slot].iter().map(|&b| b as usize > cand.cut).collect()
}

#[derive(Clone)]
struct Best {
    welfare: f64,
    treated: usize,
    tree: PolicyTree,
}

impl Best {
    /// Strictly better: higher welfare, then fewer treated. Equal keeps the
    /// incumbent, so iterating in encoding order realizes the full
    /// tie-break (welfare, fewer treated, lexicographic encoding).
    fn improves(&self, other: &Option<Best>) -> bool {
        match other {
            None => true,
            Some(o) => {
                self.welfare > o.welfare
                    || (self.welfare == o.welfare && self.treated < o.treated)
            }
        }
    }
}

fn merge(into: &mut Option<Best>, cand: Best) {
    if cand.improves(into) {
        *into = Some(cand);
    }
}

/// Exact maximizer of the estimated welfare over all complete depth-`depth`
/// trees on the grid. Ties break toward fewer treated units, then the
/// lexicographically smallest tree encoding.
pub fn optimize_policy(
    data: &Dataset,
    scores: &ScoreSet,
    spec: &WelfareSpec,
    grid: &ThresholdGrid,
    depth: u8,
) -> Result<(PolicyTree, f64)> {
    if depth > 2 {
        return Err(Error::Argument(format!("depth must be 0, 1 or 2, got {depth}")));
    }
    let cells = build_cells(data, grid)?;
    match scores {
        ScoreSet::Linear(lin) => {
            if spec.family.is_pair() {
                return Err(Error::Argument(
                    "linear scores passed for a pairwise welfare family".into(),
                ));
            }
            if cells.n_cells > LINEAR_CELL_CAP {
                return Err(Error::Argument(format!(
                    "grid induces {} cells, above the optimizer cap",
                    cells.n_cells
                )));
            }
            let n = data.n();
            let mut cell_s1 = vec![0.0f64; cells.n_cells];
            let mut cell_s0 = vec![0.0f64; cells.n_cells];
            let mut cell_count = vec![0usize; cells.n_cells];
            for i in 0..n {
                let c = cells.cell_of[i] as usize;
                cell_s1[c] += lin.s1[i];
                cell_s0[c] += lin.s0[i];
                cell_count[c] += 1;
            }
            let eval = LinearEval { cell_s1, cell_s0, cell_count, n: n as f64 };
            search(&cells, grid, depth, &eval)
        }
        ScoreSet::Pair(pair) => {
            if !spec.family.is_pair() {
                return Err(Error::Argument(
                    "pair scores passed for a linear welfare family".into(),
                ));
            }
            if cells.n_cells > PAIR_CELL_CAP {
                return Err(Error::Argument(format!(
                    "grid induces {} cells, above the pairwise optimizer cap of {}; \
                     use fewer cuts or features",
                    cells.n_cells, PAIR_CELL_CAP
                )));
            }
            let n = data.n();
            let n_pairs = pair.n_pairs();
            let nc = cells.n_cells;
            // A[ab][u * nc + v]: sum of scores of pairs with cell(i) = u,
            // cell(j) = v. Filled in pair order, sequentially deterministic.
            let mut agg: [Vec<f64>; 4] = [
                vec![0.0; nc * nc],
                vec![0.0; nc * nc],
                vec![0.0; nc * nc],
                vec![0.0; nc * nc],
            ];
            for ab in 0..4 {
                let slice = pair.slice((ab / 2) as u8, (ab % 2) as u8);
                let slice = slice.as_ref();
                let a = &mut agg[ab];
                for p in 0..n_pairs {
                    let (i, j) = pair_from_index(n, p);
                    a[cells.cell_of[i] as usize * nc + cells.cell_of[j] as usize] += slice[p];
                }
            }
            let mut cell_count = vec![0usize; nc];
            for i in 0..n {
                cell_count[cells.cell_of[i] as usize] += 1;
            }
            let eval = PairEval {
                agg,
                cell_count,
                n_cells: nc,
                n_pairs: n_pairs as f64,
                family: spec.family,
            };
            search(&cells, grid, depth, &eval)
        }
    }
}

/// Structure-level evaluator: given the leaf of every cell, produce welfare
/// and treated counts for all leaf labelings.
///
/// Welfare sums always run over cells in index order, branching only on the
/// cell's action. Two trees inducing the same treatment assignment then
/// produce bit-identical welfare, so exact-equality tie-breaks see logically
/// equivalent trees as true ties.
trait StructureEval: Sync {
    /// Number of leaves the labelings run over.
    fn score_labelings(&self, leaf_of_cell: &[u8], n_leaves: usize, out: &mut Vec<(f64, usize)>);
}

struct LinearEval {
    cell_s1: Vec<f64>,
    cell_s0: Vec<f64>,
    cell_count: Vec<usize>,
    n: f64,
}

impl StructureEval for LinearEval {
    fn score_labelings(&self, leaf_of_cell: &[u8], n_leaves: usize, out: &mut Vec<(f64, usize)>) {
        out.clear();
        for bits in 0..(1usize << n_leaves) {
            let mut act = [false; 4];
            for (p, slot) in act.iter_mut().enumerate().take(n_leaves) {
                *slot = (bits >> p) & 1 == 1;
            }
            let mut sum = 0.0;
            let mut treated = 0usize;
            for (cell, &leaf) in leaf_of_cell.iter().enumerate() {
                if act[leaf as usize] {
                    sum += self.cell_s1[cell];
                    treated += self.cell_count[cell];
                } else {
                    sum += self.cell_s0[cell];
                }
            }
            out.push((sum / self.n, treated));
        }
    }
}

struct PairEval {
    agg: [Vec<f64>; 4],
    cell_count: Vec<usize>,
    n_cells: usize,
    n_pairs: f64,
    family: WelfareFamily,
}

impl StructureEval for PairEval {
    fn score_labelings(&self, leaf_of_cell: &[u8], n_leaves: usize, out: &mut Vec<(f64, usize)>) {
        out.clear();
        let nc = self.n_cells;
        let mut act_of_cell = vec![0u8; nc];
        for bits in 0..(1usize << n_leaves) {
            let mut act = [0u8; 4];
            for (p, slot) in act.iter_mut().enumerate().take(n_leaves) {
                *slot = ((bits >> p) & 1) as u8;
            }
            let mut treated = 0usize;
            for (cell, &leaf) in leaf_of_cell.iter().enumerate() {
                act_of_cell[cell] = act[leaf as usize];
                if act[leaf as usize] == 1 {
                    treated += self.cell_count[cell];
                }
            }
            // Canonical accumulation: per (a, b) slot, cells in index order.
            let mut sums = [0.0f64; 4];
            for u in 0..nc {
                let row = u * nc;
                let au = act_of_cell[u] as usize;
                for v in 0..nc {
                    let slot = au * 2 + act_of_cell[v] as usize;
                    sums[slot] += self.agg[slot][row + v];
                }
            }
            let m = (sums[0] + sums[1] + sums[2] + sums[3]) / self.n_pairs;
            let welfare = match self.family {
                WelfareFamily::KendallTau { target } => -(m - target).abs(),
                _ => m,
            };
            out.push((welfare, treated));
        }
    }
}

fn search(
    cells: &CellIndex,
    grid: &ThresholdGrid,
    depth: u8,
    eval: &dyn StructureEval,
) -> Result<(PolicyTree, f64)> {
    let cands = sorted_candidates(grid);
    let nc = cells.n_cells;
    let mut best: Option<Best> = None;

    match depth {
        0 => {
            let leaf_of_cell = vec![0u8; nc];
            let mut scored = Vec::new();
            eval.score_labelings(&leaf_of_cell, 1, &mut scored);
            for (bits, &(welfare, treated)) in scored.iter().enumerate() {
                merge(
                    &mut best,
                    Best { welfare, treated, tree: PolicyTree::Leaf { treat: bits & 1 == 1 } },
                );
            }
        }
        1 => {
            let sides: Vec<Vec<bool>> = cands.iter().map(|c| side_of_cells(cells, c)).collect();
            let per_cand: Vec<Option<Best>> = cands
                .par_iter()
                .enumerate()
                .map(|(ci, cand)| {
                    let leaf_of_cell: Vec<u8> =
                        sides[ci].iter().map(|&s| s as u8).collect();
                    let mut scored = Vec::new();
                    eval.score_labelings(&leaf_of_cell, 2, &mut scored);
                    let mut local: Option<Best> = None;
                    for (bits, &(welfare, treated)) in scored.iter().enumerate() {
                        merge(
                            &mut local,
                            Best {
                                welfare,
                                treated,
                                tree: PolicyTree::Depth1 {
                                    split: cand.split,
                                    leaves: [bits & 1 == 1, bits >> 1 & 1 == 1],
                                },
                            },
                        );
                    }
                    local
                })
                .collect();
            for local in per_cand.into_iter().flatten() {
                merge(&mut best, local);
            }
        }
        _ => {
            let sides: Vec<Vec<bool>> = cands.iter().map(|c| side_of_cells(cells, c)).collect();
            let per_root: Vec<Option<Best>> = (0..cands.len())
                .into_par_iter()
                .map(|ri| {
                    let mut local: Option<Best> = None;
                    let mut leaf_of_cell = vec![0u8; nc];
                    let mut scored = Vec::new();
                    for li in 0..cands.len() {
                        for rgt in 0..cands.len() {
                            for cell in 0..nc {
                                leaf_of_cell[cell] = if sides[ri][cell] {
                                    2 + sides[rgt][cell] as u8
                                } else {
                                    sides[li][cell] as u8
                                };
                            }
                            eval.score_labelings(&leaf_of_cell, 4, &mut scored);
                            for (bits, &(welfare, treated)) in scored.iter().enumerate() {
                                let cand = Best {
                                    welfare,
                                    treated,
                                    tree: PolicyTree::Depth2 {
                                        root: cands[ri].split,
                                        left: cands[li].split,
                                        right: cands[rgt].split,
                                        leaves: [
                                            bits & 1 == 1,
                                            bits >> 1 & 1 == 1,
                                            bits >> 2 & 1 == 1,
                                            bits >> 3 & 1 == 1,
                                        ],
                                    },
                                };
                                merge(&mut local, cand);
                            }
                        }
                    }
                    local
                })
                .collect();
            for local in per_root.into_iter().flatten() {
                merge(&mut best, local);
            }
        }
    }

    let best = best.ok_or_else(|| Error::Argument("empty policy class".into()))?;
    Ok((best.tree, best.welfare))
}
