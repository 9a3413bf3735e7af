//! U-statistic evaluation engine, the permutation (sum-of-iid-blocks)
//! representation used as a test oracle, and the descriptive indices:
//! Gini, IOp share and Kendall's tau.
//!
//! Pair loops are chunk-blocked (see [`crate::util::SUM_CHUNK`]) so totals
//! are reproducible under any worker count.

use rand::seq::SliceRandom;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::util::{chunk_sum, derived_rng, mean, par_chunk_sum, pairwise_sum, sgn};

/// An arity-2 kernel over dataset rows.
pub trait PairKernel: Send + Sync {
    fn eval(&self, data: &Dataset, i: usize, j: usize) -> f64;
    /// Whether `eval(i, j) == eval(j, i)` for all rows.
    fn is_symmetric(&self) -> bool {
        true
    }
}

/// Wrap a closure as a [`PairKernel`].
pub struct FnKernel<F: Fn(&Dataset, usize, usize) -> f64 + Send + Sync> {
    f: F,
    symmetric: bool,
}

impl<F: Fn(&Dataset, usize, usize) -> f64 + Send + Sync> FnKernel<F> {
    pub fn new(f: F, symmetric: bool) -> Self {
        FnKernel { f, symmetric }
    }
}

impl<F: Fn(&Dataset, usize, usize) -> f64 + Send + Sync> PairKernel for FnKernel<F> {
    fn eval(&self, data: &Dataset, i: usize, j: usize) -> f64 {
        (self.f)(data, i, j)
    }
    fn is_symmetric(&self) -> bool {
        self.symmetric
    }
}

/// Start of row i in the flattened upper triangle: i*(n-1) - i*(i-1)/2.
fn row_start(n: usize, i: usize) -> usize {
    i * (n - 1) - (i * i - i) / 2
}

/// Map a flat pair index `p in 0..n(n-1)/2` to the pair (i, j), i < j, in
/// row-major upper-triangle order.
pub fn pair_from_index(n: usize, p: usize) -> (usize, usize) {
    // Solve i from the cumulative row lengths; float guess then adjust.
    let nf = n as f64;
    let pf = p as f64;
    let disc = ((2.0 * nf - 1.0) * (2.0 * nf - 1.0) - 8.0 * pf).max(0.0);
    let mut i = (((2.0 * nf - 1.0 - disc.sqrt()) / 2.0).floor().max(0.0)) as usize;
    i = i.min(n - 2);
    loop {
        if p < row_start(n, i) {
            i -= 1;
            continue;
        }
        if p >= row_start(n, i + 1) {
            i += 1;
            continue;
        }
        let j = i + 1 + (p - row_start(n, i));
        return (i, j);
    }
}

/// Flat index of the pair (i, j), i < j.
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    row_start(n, i) + (j - i - 1)
}

/// Mean of `f(i, j)` over all pairs i < j, chunk-blocked and parallel.
pub fn pair_mean<F>(n: usize, f: F) -> Result<f64>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    if n < 2 {
        return Err(Error::Argument(format!("need n >= 2 for pair statistics, got {n}")));
    }
    let n_pairs = n * (n - 1) / 2;
    let total = par_chunk_sum(n_pairs, |p| {
        let (i, j) = pair_from_index(n, p);
        f(i, j)
    });
    Ok(total / n_pairs as f64)
}

/// Exact U-statistic: the mean of the kernel over all pairs i < j.
pub fn u_statistic(data: &Dataset, kernel: &dyn PairKernel) -> Result<f64> {
    pair_mean(data.n(), |i, j| kernel.eval(data, i, j))
}

/// U-statistic of a kernel over a plain slice, used by the index functions.
fn slice_pair_mean<F>(n: usize, f: F) -> Result<f64>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    pair_mean(n, f)
}

fn factorial_u64(n: usize) -> Option<u64> {
    let mut acc: u64 = 1;
    for k in 2..=n as u64 {
        acc = acc.checked_mul(k)?;
    }
    Some(acc)
}

/// Estimate the U-statistic through its representation as an average over
/// permutations of means of independent pair evaluations: each permutation
/// contributes the mean of `f` over the floor(n/2) disjoint pairs
/// `(kappa(i), kappa(floor(n/2)+i))`.
///
/// When `permutations` equals n! (and n is small enough to enumerate), all
/// permutations are visited and the result equals [`u_statistic`] exactly;
/// otherwise `permutations` random permutations are sampled with `seed`.
pub fn hoeffding_estimate(
    data: &Dataset,
    kernel: &dyn PairKernel,
    permutations: u64,
    seed: u64,
) -> Result<f64> {
    let n = data.n();
    if n < 2 {
        return Err(Error::Argument(format!("need n >= 2, got {n}")));
    }
    if permutations == 0 {
        return Err(Error::Argument("need at least one permutation".into()));
    }
    let half = n / 2;
    let block_mean = |perm: &[usize]| -> f64 {
        let s = chunk_sum(half, |i| kernel.eval(data, perm[i], perm[half + i]));
        s / half as f64
    };

    if factorial_u64(n) == Some(permutations) && n <= 10 {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut means = Vec::with_capacity(permutations as usize);
        loop {
            means.push(block_mean(&perm));
            if !next_permutation(&mut perm) {
                break;
            }
        }
        debug_assert_eq!(means.len() as u64, permutations);
        return Ok(pairwise_sum(&means) / means.len() as f64);
    }

    let mut rng = derived_rng(seed, 0x40EFFD);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut means = Vec::with_capacity(permutations as usize);
    for _ in 0..permutations {
        perm.shuffle(&mut rng);
        means.push(block_mean(&perm));
    }
    Ok(pairwise_sum(&means) / means.len() as f64)
}

/// Advance `perm` to the next lexicographic permutation; false once the last
/// permutation has been visited.
fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// The Gini mean-difference kernel `(a + b - |a - b|) / 2 = min(a, b)`.
pub fn gini_kernel(a: f64, b: f64) -> f64 {
    0.5 * (a + b - (a - b).abs())
}

/// Gini index of a non-negative vector: the U-statistic mean of |y_i - y_j|
/// divided by twice the mean.
pub fn gini_index(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Argument(format!("need n >= 2, got {n}")));
    }
    if let Some(i) = values.iter().position(|&v| v < 0.0) {
        return Err(Error::Argument(format!("negative value {} at index {i}", values[i])));
    }
    let m = mean(values);
    if m <= 0.0 {
        return Err(Error::Numeric("Gini undefined for a zero-mean vector".into()));
    }
    let mean_abs_diff = slice_pair_mean(n, |i, j| (values[i] - values[j]).abs())?;
    Ok(mean_abs_diff / (2.0 * m))
}

/// Kendall's tau: the U-statistic mean of sgn(y_i - y_j) * sgn(x_i - x_j),
/// with ties contributing zero.
pub fn kendall_tau(y: &[f64], x1: &[f64]) -> Result<f64> {
    if y.len() != x1.len() {
        return Err(Error::Argument(format!(
            "length mismatch: {} vs {}",
            y.len(),
            x1.len()
        )));
    }
    slice_pair_mean(y.len(), |i, j| sgn(y[i] - y[j]) * sgn(x1[i] - x1[j]))
}

/// Inequality of opportunity: the Gini of the fitted circumstance
/// predictions, plus its share of total outcome inequality.
pub fn iop_share(y: &[f64], gamma_hat: &[f64]) -> Result<(f64, f64)> {
    if y.len() != gamma_hat.len() {
        return Err(Error::Argument(format!(
            "length mismatch: {} vs {}",
            y.len(),
            gamma_hat.len()
        )));
    }
    let iop = gini_index(gamma_hat)?;
    let total = gini_index(y)?;
    Ok((iop, iop / total))
}
