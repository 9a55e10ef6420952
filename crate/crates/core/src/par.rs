//! Execution mode for the data-parallel loops.
//!
//! Every hot loop in the crate (per-frame rendering, per-row filtering,
//! per-pair flow estimation, per-sequence generation) goes through the
//! helpers here. With the `parallel` feature they fan out on the current
//! rayon pool; without it, or with [`Exec::Sequential`], they run in order on
//! the calling thread. Results are always collected in index order, and
//! floating-point reductions are done per chunk and then summed
//! sequentially, so output never depends on the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// `Parallel` only when the crate was built with rayon support.
    pub fn effective(self) -> Exec {
        if cfg!(feature = "parallel") {
            self
        } else {
            Exec::Sequential
        }
    }

    pub fn from_jobs(jobs: usize) -> Exec {
        if jobs <= 1 {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }
}

/// Evaluates `f(i)` for `i in 0..n` and returns the results in index order.
pub fn map_indexed<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec.effective() {
        #[cfg(feature = "parallel")]
        Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

/// Like [`map_indexed`] but short-circuits on the first error (lowest index
/// wins when run sequentially; some error is returned when run in parallel).
pub fn try_map_indexed<T, E, F>(exec: Exec, n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    match exec.effective() {
        #[cfg(feature = "parallel")]
        Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

/// Calls `f(row_index, row)` on each `row_len`-sized chunk of `data`.
pub fn for_each_row_mut<T, F>(exec: Exec, data: &mut [T], row_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    assert!(row_len > 0, "row length must be positive");
    match exec.effective() {
        #[cfg(feature = "parallel")]
        Exec::Parallel => data
            .par_chunks_mut(row_len)
            .enumerate()
            .for_each(|(y, row)| f(y, row)),
        _ => data
            .chunks_mut(row_len)
            .enumerate()
            .for_each(|(y, row)| f(y, row)),
    }
}

/// Sum of `f(i)` over `0..n`, reduced in index order.
pub fn sum_indexed<F>(exec: Exec, n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_indexed(exec, n, f).into_iter().sum()
}
