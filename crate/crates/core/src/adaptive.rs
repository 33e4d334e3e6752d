//! Scene-adapted depth sampling.
//!
//! Planes whose alpha never reaches a floor are dropped, the surviving
//! planes are weighted by their mean alpha, and the dropped planes are
//! re-inserted inside the heaviest intervals (uniform in inverse depth)
//! before the MPI is rebuilt from scratch on the new sampling.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::DepthList;
use crate::math;
use crate::mpi::{HeuristicParams, Mpi};
use crate::pipeline::{build_mpi_with, initial_mpi, scene_cues, Scene};

pub const DEFAULT_ALPHA_FLOOR: f64 = 0.3;

/// Drops planes whose per-pixel maximum alpha stays below `alpha_floor`.
///
/// At least two planes always survive: when fewer pass the floor, the two
/// planes with the largest maxima are kept (earlier index wins ties).
/// Returns the survivors, back to front, and the number removed.
pub fn prune_depths(mpi: &Mpi, alpha_floor: f64) -> (DepthList, usize) {
    let depth_count = mpi.depth_count();
    let maxima: Vec<f64> = (0..depth_count)
        .map(|d| mpi.alpha_plane(d).data().iter().copied().fold(0.0, f64::max))
        .collect();
    let mut keep: Vec<bool> = maxima.iter().map(|&m| m >= alpha_floor).collect();
    if keep.iter().filter(|&&k| k).count() < 2 {
        let mut order: Vec<usize> = (0..depth_count).collect();
        order.sort_by(|&a, &b| maxima[b].total_cmp(&maxima[a]).then(a.cmp(&b)));
        keep = vec![false; depth_count];
        for &i in &order[..2] {
            keep[i] = true;
        }
    }
    let kept: Vec<f64> = mpi
        .depths()
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(&d, _)| d)
        .collect();
    let removed = depth_count - kept.len();
    (
        DepthList::new(kept).expect("a subset of a valid depth list stays valid"),
        removed,
    )
}

/// Plane and interval weights of the kept planes.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalWeights {
    pub kept_depths: DepthList,
    /// Spatial mean alpha of each kept plane.
    pub plane_weights: Vec<f64>,
    /// Mean of the two endpoint weights of each interval.
    pub interval_weights: Vec<f64>,
}

pub fn interval_weights(mpi: &Mpi, kept: &DepthList) -> Result<IntervalWeights> {
    let plane_px = (mpi.width() * mpi.height()) as f64;
    let plane_weights = kept
        .iter()
        .map(|depth| {
            let d = mpi
                .depths()
                .iter()
                .position(|candidate| candidate == depth)
                .ok_or(Error::Membership)?;
            Ok(mpi.alpha_plane(d).data().iter().sum::<f64>() / plane_px)
        })
        .collect::<Result<Vec<f64>>>()?;
    let interval_weights = plane_weights.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
    Ok(IntervalWeights {
        kept_depths: kept.clone(),
        plane_weights,
        interval_weights,
    })
}

/// Splits `count` new planes across intervals proportionally to their
/// weights with largest-remainder rounding. Equal remainders favour the
/// nearer interval (higher index). Non-positive total weight falls back to
/// equal shares.
pub fn allocate(weights: &[f64], count: usize) -> Vec<usize> {
    if weights.is_empty() {
        return Vec::new();
    }
    let total: f64 = weights.iter().map(|w| w.max(0.0)).sum();
    let shares: Vec<f64> = if total > 0.0 && total.is_finite() {
        weights.iter().map(|w| count as f64 * w.max(0.0) / total).collect()
    } else {
        vec![count as f64 / weights.len() as f64; weights.len()]
    };
    let mut allocation: Vec<usize> = shares.iter().map(|&s| math::floor(s) as usize).collect();
    let assigned: usize = allocation.iter().sum();
    let mut remaining = count.saturating_sub(assigned);
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = shares[a] - math::floor(shares[a]);
        let fb = shares[b] - math::floor(shares[b]);
        fb.total_cmp(&fa).then(b.cmp(&a))
    });
    for &i in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        allocation[i] += 1;
        remaining -= 1;
    }
    allocation
}

/// Re-inserts `removed_count` planes: interval `i` receiving `m` planes
/// gets them at `m` evenly spaced interior inverse depths.
pub fn redistribute_depths(weights: &IntervalWeights, removed_count: usize) -> Result<DepthList> {
    let kept = weights.kept_depths.as_slice();
    if weights.interval_weights.len() + 1 != kept.len() {
        return Err(Error::Shape("interval weights do not match the kept depths"));
    }
    let allocation = allocate(&weights.interval_weights, removed_count);
    let mut depths = Vec::with_capacity(kept.len() + removed_count);
    for (i, &m) in allocation.iter().enumerate() {
        depths.push(kept[i]);
        let (far_inv, near_inv) = (1.0 / kept[i], 1.0 / kept[i + 1]);
        for j in 1..=m {
            let t = j as f64 / (m + 1) as f64;
            depths.push(1.0 / (far_inv + (near_inv - far_inv) * t));
        }
    }
    depths.push(kept[kept.len() - 1]);
    DepthList::new(depths)
}

/// Steps 1–3 on an already refined MPI: prune, weigh, redistribute.
pub fn adapt_depths(mpi: &Mpi, alpha_floor: f64) -> Result<DepthList> {
    let (kept, removed) = prune_depths(mpi, alpha_floor);
    if removed == 0 {
        return Ok(mpi.depths().clone());
    }
    let weights = interval_weights(mpi, &kept)?;
    redistribute_depths(&weights, removed)
}

/// Outcome of [`adapt_and_rebuild`].
#[derive(Debug, Clone)]
pub struct AdaptedMpi {
    /// One refinement iteration on the initial sampling.
    pub first_iterate: Mpi,
    pub adapted_depths: DepthList,
    /// The MPI rebuilt from M₀ on the adapted sampling.
    pub mpi: Mpi,
}

/// Computes M₁ on `initial_depths`, adapts the sampling, then reruns the
/// whole pipeline (sweeps, M₀ and `steps` iterations) on the new depths.
pub fn adapt_and_rebuild(
    scene: &Scene,
    initial_depths: &DepthList,
    steps: usize,
    params: &HeuristicParams,
    alpha_floor: f64,
) -> Result<AdaptedMpi> {
    if steps == 0 {
        return Err(Error::OutOfRange("at least one refinement step is required"));
    }
    let reference = scene.reference_camera()?;
    let psvs = scene.plane_sweeps(&reference, initial_depths)?;
    let m0 = initial_mpi(&psvs, &reference, initial_depths)?;
    let cues = scene_cues(scene, &psvs, &m0)?;
    let first_iterate = crate::mpi::refine_step(&m0, &cues, |c, m| crate::mpi::heuristic_residual(c, m, params))?;
    let adapted_depths = adapt_depths(&first_iterate, alpha_floor)?;
    let mpi = build_mpi_with(scene, &reference, &adapted_depths, steps, params)?;
    Ok(AdaptedMpi {
        first_iterate,
        adapted_depths,
        mpi,
    })
}
