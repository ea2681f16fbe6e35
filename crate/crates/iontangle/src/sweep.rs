//! Grid enumeration and parallel evaluation.

use rayon::prelude::*;

use crate::config::Axis;
use crate::error::RunError;

/// Environment variable capping the worker pool size.
pub const THREADS_ENV: &str = "IONTANGLE_THREADS";

/// Cartesian product of the axes, last axis fastest.
pub fn grid_points(axes: &[Axis]) -> Vec<Vec<f64>> {
    let mut points = vec![Vec::new()];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    points
}

/// Evaluates `f` on every item in parallel and returns the results in input
/// order.
pub fn par_map<T, R, F>(items: &[T], f: F) -> Result<Vec<R>, RunError>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| RunError::Config(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

fn thread_cap() -> Result<Option<usize>, RunError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(RunError::Config(format!("{THREADS_ENV} must be a positive integer, got `{s}`"))),
        },
    }
}
