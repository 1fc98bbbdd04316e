//! Order-preserving map, parallel when the `parallel` feature is on.

#[cfg(feature = "parallel")]
pub fn ordered_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn ordered_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Configures the global worker pool from `CKRAUS_WORKERS`, if set.
#[cfg(feature = "parallel")]
pub fn init_workers_from_env() -> Option<usize> {
    let n = std::env::var(WORKERS_ENV).ok()?.trim().parse::<usize>().ok()?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok()?;
    Some(n)
}

#[cfg(not(feature = "parallel"))]
pub fn init_workers_from_env() -> Option<usize> {
    None
}

pub const WORKERS_ENV: &str = "CKRAUS_WORKERS";
