//! Trial-level parallelism.

use rayon::prelude::*;

/// Environment variable that caps the number of worker threads. Unset or `0`
/// means one worker per available core.
pub const WORKERS_ENV: &str = "APA_WORKERS";

pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Runs `f(trial)` for every trial index and returns the results in trial
/// order, whatever order the workers finished in.
pub fn map_trials<T, F>(trials: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    let workers = worker_count();
    if workers == 1 {
        return (0..trials as u64).map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| (0..trials as u64).into_par_iter().map(&f).collect()),
        Err(_) => (0..trials as u64).map(f).collect(),
    }
}
