//! Element-loop execution policy.
//!
//! Per-element work (assembly, error quadrature) is embarrassingly parallel.
//! With the `parallel` feature the loops run on the ambient rayon pool;
//! results are collected in element order and reduced sequentially, so the
//! output is bitwise identical for any thread count. Without the feature
//! the loops run sequentially with the same collection order.

/// Maps `f` over `0..n` and returns the results in index order.
#[cfg(feature = "parallel")]
pub fn map_elements<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Maps `f` over `0..n` and returns the results in index order.
#[cfg(not(feature = "parallel"))]
pub fn map_elements<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Sequential reference path, available for benchmarking against
/// [`map_elements`] regardless of features.
pub fn map_elements_seq<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Runs `f` inside a rayon pool of `threads` threads when the `parallel`
/// feature is enabled. `threads = 1` and the no-feature build both execute
/// on the calling thread.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .expect("failed to build thread pool");
        pool.install(f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}
