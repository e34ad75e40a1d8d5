//! Replicate orchestration with order-independent merging.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "CUTLAB_WORKERS";

/// Seed of replicate `index` under base seed `seed`.
pub fn replicate_seed(seed: u64, index: u64) -> u64 {
    seed ^ index
}

/// Worker count: an explicit positive value, else `CUTLAB_WORKERS`, else
/// the number of available cores.
pub fn resolve_workers(requested: usize) -> usize {
    if requested > 0 {
        return requested;
    }
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Tallies that merge associatively and commutatively.
pub trait Tally: Default {
    fn merge(&mut self, other: &Self);
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplicateFailure {
    pub index: u64,
    pub message: String,
}

/// Results of replicates `0..results.len()`, in index order. When some
/// replicate failed, `results` holds exactly the replicates before the
/// first failing index.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome<T> {
    pub results: Vec<T>,
    pub failure: Option<ReplicateFailure>,
}

impl<T> RunOutcome<T> {
    pub fn is_partial(&self) -> bool {
        self.failure.is_some()
    }

    pub fn merged<U: Tally>(&self, mut project: impl FnMut(&T) -> U) -> U {
        let mut acc = U::default();
        for r in &self.results {
            acc.merge(&project(r));
        }
        acc
    }
}

/// Runs `task(0..replicates)` on `workers` threads. Each replicate is a
/// pure function of its index, so the outcome does not depend on the
/// worker count or scheduling.
pub fn run_parallel<T, F>(replicates: u64, workers: usize, task: F) -> RunOutcome<T>
where
    T: Send,
    F: Fn(u64) -> Result<T, String> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(resolve_workers(workers))
        .build()
        .expect("thread pool");
    let first_failure = AtomicU64::new(u64::MAX);
    let slots: Vec<Option<Result<T, String>>> = pool.install(|| {
        (0..replicates)
            .into_par_iter()
            .map(|r| {
                if r > first_failure.load(Ordering::Relaxed) {
                    return None;
                }
                let out = task(r);
                if out.is_err() {
                    first_failure.fetch_min(r, Ordering::Relaxed);
                }
                Some(out)
            })
            .collect()
    });
    let mut results = Vec::with_capacity(slots.len());
    for (r, slot) in slots.into_iter().enumerate() {
        match slot {
            Some(Ok(v)) => results.push(v),
            Some(Err(message)) => {
                return RunOutcome { results, failure: Some(ReplicateFailure { index: r as u64, message }) };
            }
            None => unreachable!("replicates are only skipped after an earlier failure"),
        }
    }
    RunOutcome { results, failure: None }
}
