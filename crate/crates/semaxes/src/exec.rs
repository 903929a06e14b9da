//! Execution helpers for the data-parallel stages.
//!
//! Every parallel loop in this crate maps an index range to independent work
//! items and collects the results in index order, so the output is bitwise
//! identical whichever scheduler runs it. With the `parallel` feature (the
//! default) the work is spread over rayon's thread pool; without it the
//! sequential fallback below is used. The `*_seq` variant stays public so the
//! benchmark suite can compare both paths in one build.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `0..n` through `f`, preserving index order in the output.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_indexed_seq(n, f)
    }
}

/// Sequential fallback of [`map_indexed`]; used when the `parallel` feature
/// is disabled and by the benchmark suite.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Sums `f(chunk_index)` over `0..chunks`. The per-chunk results are integer
/// counts, so the reduction order cannot affect the total.
pub fn sum_counts<F>(chunks: usize, f: F) -> u64
where
    F: Fn(usize) -> u64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..chunks).into_par_iter().map(f).sum()
    }
    #[cfg(not(feature = "parallel"))]
    {
        sum_counts_seq(chunks, f)
    }
}

/// Sequential fallback of [`sum_counts`].
pub fn sum_counts_seq<F>(chunks: usize, f: F) -> u64
where
    F: Fn(usize) -> u64,
{
    (0..chunks).map(f).sum()
}
