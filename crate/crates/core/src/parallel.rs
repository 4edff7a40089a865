//! Data-parallel helpers over index ranges.
//!
//! With the `parallel` feature (default) work is spread over a rayon pool;
//! without it every [`Execution`] runs sequentially. Results never depend on
//! the schedule: maps preserve index order and folds must merge associatively.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// `None` uses rayon's global pool (all cores).
    Parallel {
        workers: Option<usize>,
    },
}

impl Default for Execution {
    fn default() -> Self {
        Execution::Parallel { workers: None }
    }
}

impl Execution {
    pub fn with_workers(workers: Option<usize>) -> Self {
        match workers {
            Some(1) => Execution::Sequential,
            w => Execution::Parallel { workers: w },
        }
    }
}

/// `f(0), …, f(n−1)` in index order.
pub fn map_range<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Execution::Sequential => (0..n).map(f).collect(),
        Execution::Parallel { workers } => imp::map_range(workers, n, f),
    }
}

/// Folds every index into per-worker accumulators, then merges them.
pub fn fold_range<A, Id, Fo, M>(exec: Execution, n: usize, identity: Id, fold: Fo, merge: M) -> A
where
    A: Send,
    Id: Fn() -> A + Sync + Send,
    Fo: Fn(A, usize) -> A + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    match exec {
        Execution::Sequential => (0..n).fold(identity(), fold),
        Execution::Parallel { workers } => imp::fold_range(workers, n, identity, fold, merge),
    }
}

#[cfg(feature = "parallel")]
mod imp {
    use rayon::prelude::*;

    fn in_pool<R: Send>(workers: Option<usize>, job: impl FnOnce() -> R + Send) -> R {
        match workers {
            None => job(),
            Some(w) => match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
                Ok(pool) => pool.install(job),
                Err(_) => job(),
            },
        }
    }

    pub fn map_range<T, F>(workers: Option<usize>, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        in_pool(workers, || (0..n).into_par_iter().map(&f).collect())
    }

    pub fn fold_range<A, Id, Fo, M>(workers: Option<usize>, n: usize, identity: Id, fold: Fo, merge: M) -> A
    where
        A: Send,
        Id: Fn() -> A + Sync + Send,
        Fo: Fn(A, usize) -> A + Sync + Send,
        M: Fn(A, A) -> A + Sync + Send,
    {
        in_pool(workers, || {
            (0..n).into_par_iter().fold(&identity, &fold).reduce(&identity, &merge)
        })
    }
}

#[cfg(not(feature = "parallel"))]
mod imp {
    pub fn map_range<T, F>(_workers: Option<usize>, n: usize, f: F) -> Vec<T>
    where
        F: Fn(usize) -> T,
    {
        (0..n).map(f).collect()
    }

    pub fn fold_range<A, Id, Fo, M>(_workers: Option<usize>, n: usize, identity: Id, fold: Fo, _merge: M) -> A
    where
        Id: Fn() -> A,
        Fo: Fn(A, usize) -> A,
    {
        (0..n).fold(identity(), fold)
    }
}
