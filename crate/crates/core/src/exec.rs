//! Execution policy for the data-parallel loops.
//!
//! Every parallel loop in the crate is expressed as an ordered map over an
//! index range followed by a sequential reduction, so floating-point results
//! do not depend on the number of worker threads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Rayon when the `parallel` feature is enabled, sequential otherwise.
    #[default]
    Parallel,
}

impl Execution {
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }

    /// `(0..n).map(f).collect()` with the order of the output preserved.
    pub fn map_collect<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
            #[cfg(not(feature = "parallel"))]
            Execution::Parallel => (0..n).map(f).collect(),
        }
    }

    /// Ordered map over a slice.
    pub fn map_slice<S, T, F>(self, items: &[S], f: F) -> Vec<T>
    where
        S: Sync,
        T: Send,
        F: Fn(&S) -> T + Sync + Send,
    {
        self.map_collect(items.len(), |i| f(&items[i]))
    }

    /// Ordered map where any element may fail; the first error by index wins.
    pub fn try_map_collect<T, E, F>(self, n: usize, f: F) -> Result<Vec<T>, E>
    where
        T: Send,
        E: Send,
        F: Fn(usize) -> Result<T, E> + Sync + Send,
    {
        self.map_collect(n, f).into_iter().collect()
    }
}
