//! Execution strategy for the data-parallel loops (suite cases, candidate
//! programs, corpus items). Results are always returned in input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

#[allow(clippy::derivable_impls)]
impl Default for Exec {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            Exec::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// Picks parallel execution when compiled in and more than one worker is
    /// requested.
    pub fn for_workers(workers: usize) -> Self {
        if workers <= 1 {
            Exec::Sequential
        } else {
            Exec::default()
        }
    }

    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Exec::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => items.par_iter().map(f).collect(),
        }
    }

    pub fn map_range<R, F>(self, len: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            Exec::Sequential => (0..len).map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..len).into_par_iter().map(f).collect(),
        }
    }

    /// Runs `f` on a pool bounded to `workers` threads.
    pub fn install<R, F>(self, workers: usize, f: F) -> R
    where
        R: Send,
        F: FnOnce() -> R + Send,
    {
        #[cfg(not(feature = "parallel"))]
        let _ = workers;
        match self {
            Exec::Sequential => f(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => match rayon::ThreadPoolBuilder::new()
                .num_threads(workers.max(1))
                .build()
            {
                Ok(pool) => pool.install(f),
                Err(_) => f(),
            },
        }
    }
}
