//! Sparsity objective, alpha-threshold compaction, occupancy and the
//! occupancy-vs-quality sweep.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::cues::TauMap;
use crate::error::{Error, Result};
use crate::geometry::Camera;
use crate::image::Image;
use crate::metrics;
use crate::mpi::{render_view, warp_alpha_to_view, Mpi};

/// Weight of the sparsity term in the total loss.
pub const DEFAULT_LAMBDA: f64 = 0.1;
/// Largest admissible alpha threshold.
pub const MAX_THRESHOLD: f64 = 0.95;

/// Accumulated alpha image and the derived sparsity quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityReport {
    /// `A(x)`, the depth sum of alphas on the reference grid.
    pub accumulated_alpha: Image,
    /// `Â = Σ_x max(A(x) - τ(x), 0)`.
    pub excess: f64,
    /// Minimum of `A` over the reference and all input views.
    pub a_min: f64,
    /// `L_s = Â / |Ω| + |min(A_min - 1, 0)|`.
    pub loss: f64,
}

/// Per-pixel sum of the materialized alphas over depth.
pub fn accumulated_alpha(mpi: &Mpi) -> Image {
    let (w, h) = (mpi.width(), mpi.height());
    let mut acc = Image::new(w, h, 1);
    for d in 0..mpi.depth_count() {
        for y in 0..h {
            for x in 0..w {
                let v = acc.get(x, y, 0) + mpi.alpha(d, x, y);
                acc.set(x, y, 0, v);
            }
        }
    }
    acc
}

/// `Σ_x max(A(x) - τ(x), 0)`.
pub fn sparsity_excess(accumulated: &Image, tau: &TauMap) -> Result<f64> {
    if accumulated.width() != tau.width() || accumulated.height() != tau.height() || accumulated.channels() != 1 {
        return Err(Error::Shape("accumulated alpha and tau map differ in size"));
    }
    Ok(accumulated
        .data()
        .iter()
        .zip(tau.values())
        .map(|(&a, &t)| (a - f64::from(t)).max(0.0))
        .sum())
}

/// Closed-form subgradient `∂Â/∂α_d(x)`: 1 where `A(x) > τ(x)`, else 0,
/// laid out `D×H×W`.
pub fn excess_gradient(mpi: &Mpi, tau: &TauMap) -> Result<Vec<f64>> {
    let accumulated = accumulated_alpha(mpi);
    if accumulated.width() != tau.width() || accumulated.height() != tau.height() {
        return Err(Error::Shape("MPI grid and tau map differ in size"));
    }
    let indicator: Vec<f64> = accumulated
        .data()
        .iter()
        .zip(tau.values())
        .map(|(&a, &t)| if a > f64::from(t) { 1.0 } else { 0.0 })
        .collect();
    Ok((0..mpi.depth_count()).flat_map(|_| indicator.iter().copied()).collect())
}

/// Minimum accumulated alpha over the reference grid and over each input
/// view after warping the alpha planes into it.
pub fn min_accumulated_alpha(mpi: &Mpi, input_cameras: &[Camera]) -> Result<f64> {
    let mut minimum = accumulated_alpha(mpi)
        .data()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    for cam in input_cameras {
        let warped = warp_alpha_to_view(mpi, cam)?;
        let mut acc = Image::new(cam.width(), cam.height(), 1);
        for plane in &warped {
            for (a, v) in acc.data_mut().iter_mut().zip(plane.data()) {
                *a += v;
            }
        }
        minimum = acc.data().iter().copied().fold(minimum, f64::min);
    }
    Ok(minimum)
}

/// `excess / pixel_count + |min(a_min - 1, 0)|`.
pub fn sparsity_loss(excess: f64, a_min: f64, pixel_count: usize) -> Result<f64> {
    if pixel_count == 0 {
        return Err(Error::OutOfRange("pixel count must be positive"));
    }
    Ok(excess / pixel_count as f64 + (a_min - 1.0).min(0.0).abs())
}

pub fn sparsity_report(mpi: &Mpi, tau: &TauMap, input_cameras: &[Camera]) -> Result<SparsityReport> {
    let accumulated = accumulated_alpha(mpi);
    let excess = sparsity_excess(&accumulated, tau)?;
    let a_min = min_accumulated_alpha(mpi, input_cameras)?;
    let loss = sparsity_loss(excess, a_min, mpi.width() * mpi.height())?;
    Ok(SparsityReport {
        accumulated_alpha: accumulated,
        excess,
        a_min,
        loss,
    })
}

/// `synthesis_error + λ · sparsity`.
pub fn total_loss(synthesis_error: f64, sparsity: f64, lambda: f64) -> f64 {
    synthesis_error + lambda * sparsity
}

fn check_threshold(threshold: f64) -> Result<()> {
    if (0.0..=MAX_THRESHOLD).contains(&threshold) {
        Ok(())
    } else {
        Err(Error::OutOfRange("alpha threshold must lie in [0, 0.95]"))
    }
}

/// Zeroes every voxel whose materialized alpha is below `threshold` (or
/// already exactly zero) through the explicit zero mask.
pub fn threshold_alpha(mpi: &Mpi, threshold: f64) -> Result<Mpi> {
    check_threshold(threshold)?;
    let mask = mpi
        .zero_mask()
        .iter()
        .zip(mpi.values().chunks_exact(4))
        .map(|(&masked, px)| masked || px[3] < threshold || px[3] == 0.0)
        .collect();
    Ok(mpi.with_zeroed(mask))
}

/// Fraction of voxels with a non-zero alpha.
pub fn occupancy(mpi: &Mpi) -> f64 {
    let occupied = mpi
        .zero_mask()
        .iter()
        .zip(mpi.values().chunks_exact(4))
        .filter(|(&masked, px)| !masked && px[3] > 0.0)
        .count();
    occupied as f64 / mpi.voxel_count() as f64
}

/// One row of an occupancy sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    pub threshold: f64,
    pub occupancy: f64,
    pub ssim: f64,
    pub l1: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepCurve {
    pub records: Vec<SweepRecord>,
}

impl SweepCurve {
    /// `threshold,occupancy,ssim,l1` with six decimals per value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,occupancy,ssim,l1\n");
        for r in &self.records {
            let _ = writeln!(out, "{:.6},{:.6},{:.6},{:.6}", r.threshold, r.occupancy, r.ssim, r.l1);
        }
        out
    }
}

/// Validates a sweep's threshold list: non-empty, strictly increasing and
/// within `[0, 0.95]`.
pub fn check_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(Error::EmptyInput("thresholds"));
    }
    for &t in thresholds {
        check_threshold(t)?;
    }
    if thresholds.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::OutOfRange("thresholds must be strictly increasing"));
    }
    Ok(())
}

/// Thresholds the MPI and scores it against every ground-truth view.
pub fn sweep_record(mpi: &Mpi, gt_views: &[(Camera, Image)], threshold: f64) -> Result<SweepRecord> {
    if gt_views.is_empty() {
        return Err(Error::EmptyInput("ground-truth views"));
    }
    let compacted = threshold_alpha(mpi, threshold)?;
    let mut ssim_sum = 0.0;
    let mut l1_sum = 0.0;
    for (camera, gt) in gt_views {
        let rendered = render_view(&compacted, camera)?;
        ssim_sum += metrics::ssim(&rendered, gt)?;
        l1_sum += metrics::l1(&rendered, gt)?;
    }
    let n = gt_views.len() as f64;
    Ok(SweepRecord {
        threshold,
        occupancy: occupancy(&compacted),
        ssim: ssim_sum / n,
        l1: l1_sum / n,
    })
}

/// Occupancy and render quality for each threshold, in threshold order.
pub fn occupancy_sweep(mpi: &Mpi, gt_views: &[(Camera, Image)], thresholds: &[f64]) -> Result<SweepCurve> {
    if gt_views.is_empty() {
        return Err(Error::EmptyInput("ground-truth views"));
    }
    check_thresholds(thresholds)?;
    let records = thresholds
        .iter()
        .map(|&t| sweep_record(mpi, gt_views, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepCurve { records })
}

/// `count` evenly spaced thresholds covering `[0, 0.95]`.
pub fn default_thresholds(count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => alloc::vec![0.0],
        _ => (0..count)
            .map(|i| {
                if i + 1 == count {
                    MAX_THRESHOLD
                } else {
                    MAX_THRESHOLD * i as f64 / (count - 1) as f64
                }
            })
            .collect(),
    }
}

/// Human-readable summary of a sparsity report.
pub fn describe(report: &SparsityReport) -> String {
    format!(
        "excess={:.6} a_min={:.6} sparsity_loss={:.6}",
        report.excess, report.a_min, report.loss
    )
}
