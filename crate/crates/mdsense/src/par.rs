//! Switch between rayon and plain iteration.

/// How independent work items are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Uses rayon when the `parallel` feature is on, sequential otherwise.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    match exec {
        Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
        Execution::Sequential => (0..n).map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T, F>(_exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Runs `f` on a pool of `workers` threads when given.
#[cfg(feature = "parallel")]
pub(crate) fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(w) if w > 0 => match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        _ => f(),
    }
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn with_workers<T: Send>(_workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    f()
}
