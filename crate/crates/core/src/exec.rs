//! Order-preserving map over an index range, on rayon when the `parallel`
//! feature is enabled and sequential otherwise.
//!
//! Results always come back in index order, so anything that folds them
//! left to right is independent of the worker count.

/// Worker count meaning "use every available core".
pub const ALL_WORKERS: usize = 0;

/// Maps `f` over `0..n`. `workers == 1` forces the sequential path;
/// `workers == 0` uses the global rayon pool.
pub fn map_indexed<T, F>(n: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if workers == 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    parallel_map(n, workers, f)
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(n: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;

    if workers == ALL_WORKERS {
        return (0..n).into_par_iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
        Err(_) => (0..n).map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(n: usize, _workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Whether this build can run work in parallel.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}
