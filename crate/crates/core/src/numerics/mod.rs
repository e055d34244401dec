//! Dense matrices, random streams, ranking and correlation.

mod matrix;
mod rank;
pub mod rng;

pub use matrix::Matrix;
pub(crate) use matrix::{dot, gemm_nn, gemm_nt, gemm_tn};
pub use rank::{average_ranks, pearson, spearman, RankVector};
pub use rng::RngStream;

/// Pairwise (cascade) summation. The result depends only on the order of
/// `values`, never on how work was scheduled to produce them.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Integer square root (floor).
pub fn isqrt(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}
