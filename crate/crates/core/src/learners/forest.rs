//! Bagged regression trees: bootstrap resamples of greedy
//! variance-reduction CART trees, averaged at prediction time.

use rand::Rng;

use super::{Learner, Regressor, RowMatrix};
use crate::error::{Error, Result};
use crate::util::derived_rng;

#[derive(Debug, Clone, Copy)]
pub struct Forest {
    trees: usize,
    min_leaf: usize,
    max_depth: usize,
    seed: u64,
}

impl Forest {
    pub fn new(trees: usize, min_leaf: usize, max_depth: usize, seed: u64) -> Self {
        Forest { trees: trees.max(1), min_leaf: min_leaf.max(1), max_depth, seed }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(f64),
    Split { feature: u32, threshold: f64, left: u32, right: u32 },
}

struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, q: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    at = if q[feature as usize] <= threshold { left } else { right } as usize;
                }
            }
        }
    }
}

struct Builder<'a> {
    x: &'a RowMatrix,
    y: &'a [f64],
    min_leaf: usize,
    max_depth: usize,
    nodes: Vec<Node>,
}

impl<'a> Builder<'a> {
    fn grow(&mut self, idx: &mut [u32], depth: usize) -> u32 {
        let node_id = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf(0.0));
        let mean = idx.iter().map(|&i| self.y[i as usize]).sum::<f64>() / idx.len() as f64;
        if depth >= self.max_depth || idx.len() < 2 * self.min_leaf {
            self.nodes[node_id as usize] = Node::Leaf(mean);
            return node_id;
        }
        match self.best_split(idx) {
            None => {
                self.nodes[node_id as usize] = Node::Leaf(mean);
                node_id
            }
            Some((feature, threshold)) => {
                let split_at = partition(idx, |i| {
                    self.x.row(i as usize)[feature as usize] <= threshold
                });
                let (left_idx, right_idx) = idx.split_at_mut(split_at);
                let left = self.grow(left_idx, depth + 1);
                let right = self.grow(right_idx, depth + 1);
                self.nodes[node_id as usize] = Node::Split { feature, threshold, left, right };
                node_id
            }
        }
    }

    /// Best (feature, threshold) by SSE reduction; ties resolved toward the
    /// lower feature index then the lower threshold.
    fn best_split(&self, idx: &[u32]) -> Option<(u32, f64)> {
        let m = idx.len();
        let total: f64 = idx.iter().map(|&i| self.y[i as usize]).sum();
        let mut best: Option<(f64, u32, f64)> = None;
        let mut order: Vec<u32> = Vec::with_capacity(m);
        for feature in 0..self.x.n_cols() as u32 {
            order.clear();
            order.extend_from_slice(idx);
            order.sort_unstable_by(|&a, &b| {
                let va = self.x.row(a as usize)[feature as usize];
                let vb = self.x.row(b as usize)[feature as usize];
                va.partial_cmp(&vb).unwrap().then(a.cmp(&b))
            });
            let mut left_sum = 0.0;
            for cut in 0..m - 1 {
                left_sum += self.y[order[cut] as usize];
                let n_left = cut + 1;
                let n_right = m - n_left;
                if n_left < self.min_leaf || n_right < self.min_leaf {
                    continue;
                }
                let v_here = self.x.row(order[cut] as usize)[feature as usize];
                let v_next = self.x.row(order[cut + 1] as usize)[feature as usize];
                if v_here == v_next {
                    continue;
                }
                let right_sum = total - left_sum;
                // Maximizing sum of squared leaf totals over counts is
                // equivalent to minimizing the split SSE.
                let score = left_sum * left_sum / n_left as f64
                    + right_sum * right_sum / n_right as f64;
                let threshold = 0.5 * (v_here + v_next);
                let better = match best {
                    None => true,
                    Some((s, f, t)) => {
                        score > s + 1e-12
                            || (score > s - 1e-12 && (feature, threshold) < (f, t))
                    }
                };
                if better {
                    best = Some((score, feature, threshold));
                }
            }
        }
        let baseline = total * total / m as f64;
        best.filter(|&(score, _, _)| score > baseline + 1e-10 * (1.0 + baseline.abs()))
            .map(|(_, f, t)| (f, t))
    }
}

/// Stable partition: elements satisfying `pred` first; returns the boundary.
fn partition<F: Fn(u32) -> bool>(idx: &mut [u32], pred: F) -> usize {
    let mut buf: Vec<u32> = Vec::with_capacity(idx.len());
    let mut k = 0usize;
    for &i in idx.iter() {
        if pred(i) {
            buf.push(i);
        }
    }
    let boundary = buf.len();
    for &i in idx.iter() {
        if !pred(i) {
            buf.push(i);
        }
    }
    for (slot, &i) in buf.iter().enumerate() {
        idx[slot] = i;
        k += 1;
    }
    debug_assert_eq!(k, idx.len());
    boundary
}

struct FittedForest {
    trees: Vec<Tree>,
}

impl Learner for Forest {
    fn fit(&self, x: &RowMatrix, y: &[f64]) -> Result<Box<dyn Regressor>> {
        let m = x.n_rows();
        if m == 0 || m != y.len() {
            return Err(Error::Estimation(format!(
                "forest fit needs matching non-empty data, got {m} rows and {} targets",
                y.len()
            )));
        }
        let mut trees = Vec::with_capacity(self.trees);
        for t in 0..self.trees {
            let mut rng = derived_rng(self.seed, 0xF0_0015 ^ t as u64);
            let mut idx: Vec<u32> =
                (0..m).map(|_| rng.random_range(0..m) as u32).collect();
            let mut builder = Builder {
                x,
                y,
                min_leaf: self.min_leaf,
                max_depth: self.max_depth,
                nodes: Vec::new(),
            };
            builder.grow(&mut idx, 0);
            trees.push(Tree { nodes: builder.nodes });
        }
        Ok(Box::new(FittedForest { trees }))
    }
}

impl Regressor for FittedForest {
    fn predict_one(&self, q: &[f64]) -> f64 {
        let mut acc = 0.0;
        for t in &self.trees {
            acc += t.predict(q);
        }
        acc / self.trees.len() as f64
    }
}
