//! Data-parallel helpers. `MPIFORGE_THREADS` caps the worker count; unset
//! or 0 lets rayon pick.

use mpiforge_core::compact::{check_thresholds, sweep_record, SweepCurve, SweepRecord};
use mpiforge_core::geometry::Camera;
use mpiforge_core::image::Image;
use mpiforge_core::mpi::Mpi;
use rayon::prelude::*;

use crate::error::Result;

pub const THREADS_ENV: &str = "MPIFORGE_THREADS";

pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

/// Runs `f` inside a pool sized by `MPIFORGE_THREADS`.
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(thread_count()).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Occupancy sweep with one task per threshold. Records come back in
/// threshold order, identical to the sequential sweep.
pub fn occupancy_sweep(mpi: &Mpi, views: &[(Camera, Image)], thresholds: &[f64]) -> Result<SweepCurve> {
    check_thresholds(thresholds)?;
    if views.is_empty() {
        return Err(mpiforge_core::error::Error::EmptyInput("ground-truth views").into());
    }
    let records = with_pool(|| {
        thresholds
            .par_iter()
            .map(|&t| sweep_record(mpi, views, t))
            .collect::<mpiforge_core::error::Result<Vec<SweepRecord>>>()
    })?;
    Ok(SweepCurve { records })
}
