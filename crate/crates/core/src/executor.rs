//! Execution strategy for independent per-item work.
//!
//! Batch gradient jobs, embedding of input lines and k-NN queries are pure
//! functions of their index. The [`Executor`] abstraction lets the std
//! companion crate fan such jobs out over a thread pool while this crate stays
//! single-threaded. Results are always collected in index order, so any
//! conforming executor produces the same output as [`Serial`], bit for bit.

use alloc::vec::Vec;

/// Runs `n` independent jobs and returns their results in index order.
pub trait Executor: Sync {
    fn map<T, F>(&self, n: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync;
}

/// Single-threaded executor; the deterministic reference strategy.
#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl Executor for Serial {
    fn map<T, F>(&self, n: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        (0..n).map(job).collect()
    }
}
