//! Row-level execution strategy.
//!
//! `map_indexed` fans `f(0..n)` out over the rayon pool when the
//! `parallel` feature is on and runs it inline otherwise. Results are
//! collected in index order either way, so callers observe identical
//! output regardless of feature flags or worker count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
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
        (0..n).map(f).collect()
    }
}

/// Single-threaded reference path; always available for comparisons.
pub(crate) fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}
