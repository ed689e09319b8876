//! Data-parallel sweep helper with a sequential fallback.
//!
//! Grid scans, table cells, and mode sums are independent, so they map
//! cleanly onto rayon when the `parallel` feature is enabled. Results are
//! collected in index order either way, keeping output deterministic.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..count`, in parallel when the feature allows it.
pub fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}
