//! Execution policy for the data-parallel loops.
//!
//! All parallel maps preserve input order and every floating-point
//! reduction is performed sequentially over per-item (or per-chunk)
//! results, so parallel and sequential runs are bit-identical.

use crate::Result;

/// How a data-parallel loop is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    /// Use the rayon pool when the `parallel` feature is enabled,
    /// otherwise fall back to [`Exec::Sequential`].
    #[default]
    Parallel,
    Sequential,
}

impl Exec {
    /// True if this policy will actually use worker threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Order-preserving map.
pub fn map<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Order-preserving fallible map; returns the first error in input order.
pub fn try_map<T, R, F>(exec: Exec, items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    map(exec, items, f).into_iter().collect()
}

/// Apply `f(chunk_index, chunk)` to consecutive mutable chunks of `data`.
pub fn for_each_chunk_mut<T, F>(exec: Exec, data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
        return;
    }
    let _ = exec;
    data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

/// Deterministic chunked reduction: partial results per chunk of `chunk`
/// items are combined left to right.
pub fn chunked_sum<T, F>(exec: Exec, data: &[T], chunk: usize, f: F) -> f64
where
    T: Sync,
    F: Fn(&[T]) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        let parts: Vec<f64> = data.par_chunks(chunk).map(&f).collect();
        return parts.into_iter().sum();
    }
    let _ = exec;
    data.chunks(chunk).map(f).sum()
}
