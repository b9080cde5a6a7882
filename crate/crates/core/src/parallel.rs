//! Replica fan-out. With the `parallel` feature the replicas run on the
//! current rayon pool; without it they run in index order on the caller's
//! thread. Results always come back in replica-index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluates `f(0..count)` and returns the results in index order.
pub fn map_replicas<T, F>(count: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_replicas_sequential(count, f)
    }
}

pub fn map_replicas_sequential<T, F>(count: u64, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    (0..count).map(f).collect()
}

/// Runs `op` with replica fan-out capped at `threads` workers. `None` keeps
/// the default (available parallelism).
pub fn with_threads<R, OP>(threads: Option<usize>, op: OP) -> R
where
    R: Send,
    OP: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        match threads {
            Some(t) => rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .expect("failed to build worker pool")
                .install(op),
            None => op(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        op()
    }
}
