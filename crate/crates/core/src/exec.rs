//! Execution policy for the batch entry points.
//!
//! With the `parallel` feature (on by default) [`Execution::Parallel`] runs
//! on the rayon global pool. Without it, `Parallel` silently degrades to the
//! sequential path, so callers never need their own `cfg`s. Results are
//! always returned in input order.

use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
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

impl Execution {
    /// Whether this policy will actually fan out in the current build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    pub fn map_range<R, F>(self, range: Range<u64>, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(u64) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            use rayon::prelude::*;
            return range.into_par_iter().map(f).collect();
        }
        range.map(f).collect()
    }

    /// Number of values in `range` satisfying `pred`.
    pub fn count<F>(self, range: Range<u64>, pred: F) -> u64
    where
        F: Fn(u64) -> bool + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            use rayon::prelude::*;
            return range.into_par_iter().filter(|&x| pred(x)).count() as u64;
        }
        range.filter(|&x| pred(x)).count() as u64
    }
}
