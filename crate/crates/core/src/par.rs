//! Data-parallel map/reduce helpers.
//!
//! With the `parallel` feature (default) these fan out over rayon's global
//! pool; without it they run the same closures sequentially. Results are
//! returned in input order either way, so callers see identical output.
//! [`set_sequential`] switches a parallel build to the sequential path at
//! run time, which is how the benches compare the two.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
#[cfg(feature = "parallel")]
use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Force the sequential path process-wide (`true`) or restore the default.
/// A no-op without the `parallel` feature.
pub fn set_sequential(on: bool) {
    #[cfg(feature = "parallel")]
    FORCE_SEQUENTIAL.store(on, Ordering::Relaxed);
    #[cfg(not(feature = "parallel"))]
    let _ = on;
}

/// Whether the helpers currently fan out over threads.
pub fn is_parallel() -> bool {
    #[cfg(feature = "parallel")]
    {
        !FORCE_SEQUENTIAL.load(Ordering::Relaxed)
    }
    #[cfg(not(feature = "parallel"))]
    {
        false
    }
}

/// Map `f` over `0..n`, collecting results in index order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Map `f` over a slice, collecting results in order.
pub fn map_slice<A, T, F>(items: &[A], f: F) -> Vec<T>
where
    A: Sync,
    T: Send,
    F: Fn(&A) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}

/// Chunk size for reductions. Fixed so summation order (and hence rounding)
/// does not depend on the thread count.
const CHUNK: usize = 4096;

/// Sum `f(i)` over `0..n`. Partial sums are formed over fixed-size chunks and
/// combined left to right, so the result is bit-identical with and without
/// the `parallel` feature.
pub fn sum_range<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let partial = map_range(chunks, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        (lo..hi).map(&f).sum::<f64>()
    });
    partial.into_iter().sum()
}
