//! Order-preserving data-parallel helpers.
//!
//! With the `parallel` feature (default) these fan out over the current
//! rayon pool; without it, or with [`Exec::Sequential`], they run on the
//! calling thread. Output order always equals input order, so results do
//! not depend on the number of worker threads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Execution mode for per-record work.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// True when work will actually be spread over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

pub fn map<T, U, F>(exec: Exec, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

pub fn map_owned<T, U, F>(exec: Exec, items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.into_par_iter().map(f).collect();
    }
    let _ = exec;
    items.into_iter().map(f).collect()
}

pub fn try_map<T, U, E, F>(exec: Exec, items: &[T], f: F) -> Result<Vec<U>, E>
where
    T: Sync,
    U: Send,
    E: Send,
    F: Fn(&T) -> Result<U, E> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Evaluates `pred` on every item and splits into (kept, dropped),
/// both in input order.
pub fn partition<T, F>(exec: Exec, items: Vec<T>, pred: F) -> (Vec<T>, Vec<T>)
where
    T: Send + Sync,
    F: Fn(&T) -> bool + Sync + Send,
{
    let verdicts = map(exec, &items, pred);
    let mut kept = Vec::with_capacity(items.len());
    let mut dropped = Vec::new();
    for (item, keep) in items.into_iter().zip(verdicts) {
        if keep {
            kept.push(item);
        } else {
            dropped.push(item);
        }
    }
    (kept, dropped)
}

/// Runs `f` inside a pool of `threads` workers. Without the `parallel`
/// feature this just calls `f`.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}
