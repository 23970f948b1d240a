//! Data-parallel mapping with a sequential fallback.
//!
//! With the `parallel` feature (on by default) `par_map` fans work out over
//! rayon's thread pool; without it the same call runs sequentially with an
//! identical signature and identical, order-preserving results. Everything
//! that iterates documents goes through this one seam, so the crate builds
//! and behaves the same either way.

#[cfg(feature = "parallel")]
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Whether this build parallelizes `par_map`.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}

/// Plain sequential map with the same shape as `par_map`, for baselines and
/// benchmarks.
pub fn seq_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}
