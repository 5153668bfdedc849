//! Deterministic pairwise (tree) summation.

use rayon::prelude::*;

const BLOCK: usize = 32;
const PAR_CHUNK: usize = 1 << 14;
const PAR_THRESHOLD: usize = 1 << 16;

/// Pairwise sum. The reduction tree depends only on `xs.len()`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sum of `f(x)` over `xs`.
///
/// Large inputs are cut into fixed-size chunks that may be reduced on
/// different threads; chunk sums are combined with [`pairwise_sum`] in chunk
/// order, so the result does not depend on the number of worker threads.
pub fn map_sum<F>(xs: &[f64], f: F) -> f64
where
    F: Fn(f64) -> f64 + Sync,
{
    if xs.len() < PAR_THRESHOLD {
        let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        return pairwise_sum(&vals);
    }
    let partial: Vec<f64> = xs
        .par_chunks(PAR_CHUNK)
        .map(|c| {
            let vals: Vec<f64> = c.iter().map(|&x| f(x)).collect();
            pairwise_sum(&vals)
        })
        .collect();
    pairwise_sum(&partial)
}
