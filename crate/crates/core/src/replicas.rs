//! Replica fan-out.
//!
//! Replica `r` always draws from stream `r` of the run seed, and results are
//! returned in replica order, so output never depends on the execution mode
//! or the worker count. Without the `parallel` feature every mode runs
//! sequentially.

use crate::error::Result;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run replicas concurrently.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Evaluates `f(r, stream_r)` for `r in 0..count`, in replica order.
pub fn map_replicas<T, F>(seed: u64, count: u64, exec: Execution, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, RngStream) -> Result<T> + Sync + Send,
{
    let run = |r: u64| f(r, RngStream::replica(seed, r));
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        use rayon::prelude::*;
        return (0..count).into_par_iter().map(run).collect();
    }
    let _ = exec;
    (0..count).map(run).collect()
}

/// Runs `op` on a dedicated pool of `threads` workers (`0` = rayon default).
#[cfg(feature = "parallel")]
pub fn with_threads<R: Send>(threads: usize, op: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(op),
        Err(_) => op(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_threads<R: Send>(_threads: usize, op: impl FnOnce() -> R + Send) -> R {
    op()
}
