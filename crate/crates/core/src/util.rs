//! Numeric helpers shared across the crate: deterministic reductions,
//! seeded RNG streams and normal-distribution primitives.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

/// Fixed block length for chunked pairwise summation. Totals are reproducible
/// for a given chunk size and independent of the worker count; changing the
/// chunk size may perturb totals at ~1e-13 relative.
pub const SUM_CHUNK: usize = 8192;

/// Pairwise (tree) summation. Deterministic and numerically stable.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sum `eval(i)` for `i in 0..len` using fixed-size chunks evaluated in
/// parallel. Per-chunk partials are combined in index order, so the total is
/// identical for any number of worker threads.
pub fn par_chunk_sum<F>(len: usize, eval: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    if len == 0 {
        return 0.0;
    }
    let n_chunks = len.div_ceil(SUM_CHUNK);
    let partials: Vec<f64> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * SUM_CHUNK;
            let hi = (lo + SUM_CHUNK).min(len);
            let mut acc = 0.0;
            for i in lo..hi {
                acc += eval(i);
            }
            acc
        })
        .collect();
    pairwise_sum(&partials)
}

/// Sequential chunked sum with the same chunking as [`par_chunk_sum`], for
/// callers that already run inside a parallel section.
pub fn chunk_sum<F>(len: usize, mut eval: F) -> f64
where
    F: FnMut(usize) -> f64,
{
    if len == 0 {
        return 0.0;
    }
    let n_chunks = len.div_ceil(SUM_CHUNK);
    let mut partials = Vec::with_capacity(n_chunks);
    for c in 0..n_chunks {
        let lo = c * SUM_CHUNK;
        let hi = (lo + SUM_CHUNK).min(len);
        let mut acc = 0.0;
        for i in lo..hi {
            acc += eval(i);
        }
        partials.push(acc);
    }
    pairwise_sum(&partials)
}

/// Sample mean via pairwise summation.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample standard deviation.
pub fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss = par_chunk_sum(n, |i| (xs[i] - m) * (xs[i] - m));
    (ss / (n as f64 - 1.0)).sqrt()
}

/// SplitMix64 finalizer, used to derive independent RNG streams.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// A reproducible RNG for stream `stream` under master seed `seed`.
/// Streams derived from distinct (seed, stream) pairs are independent for
/// practical purposes, so parallel work can draw without coordination.
pub fn derived_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(splitmix64(seed ^ splitmix64(stream)))
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF, Abramowitz & Stegun 26.2.17 (|error| < 7.5e-8).
pub fn normal_cdf(z: f64) -> f64 {
    if z > 8.0 {
        return 1.0;
    }
    if z < -8.0 {
        return 0.0;
    }
    let x = z.abs();
    let t = 1.0 / (1.0 + 0.2316419 * x);
    let poly = t
        * (0.319381530
            + t * (-0.356563782 + t * (1.781477937 + t * (-1.821255978 + t * 1.330274429))));
    let tail = normal_pdf(x) * poly;
    if z >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Two-sided normal p-value for a z statistic.
pub fn two_sided_p(z: f64) -> f64 {
    2.0 * (1.0 - normal_cdf(z.abs()))
}

/// Sign function with sgn(0) = 0.
pub fn sgn(a: f64) -> f64 {
    if a > 0.0 {
        1.0
    } else if a < 0.0 {
        -1.0
    } else {
        0.0
    }
}
