//! Execution policy for data-parallel loops.
//!
//! Every parallel loop in the crate goes through [`Exec`], which collects
//! results in index order so parallel and sequential runs produce identical
//! output. Without the `parallel` feature, [`Exec::Parallel`] silently runs
//! sequentially.

/// How to run an embarrassingly parallel loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// `true` when this policy actually fans out to a thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Evaluates `f(i)` for `i in 0..n` and returns the results in order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Splits `0..n` into chunks of `chunk` indices, evaluates `f(range)` on
    /// each and returns the per-chunk results in order.
    pub fn map_chunks<T, F>(self, n: usize, chunk: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
    {
        let chunk = chunk.max(1);
        let count = n.div_ceil(chunk);
        self.map(count, |c| f(c * chunk..((c + 1) * chunk).min(n)))
    }
}
