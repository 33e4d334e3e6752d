//! Plane sweep volumes and the visibility-weighted color cues that drive
//! refinement and the τ budget of the sparsity term.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{plane_homography, warp_with_inverse, Camera, DepthList};
use crate::image::Image;
use crate::mpi::{warp_alpha_to_view, Mpi};

/// Summed visibility below which the weighted statistics fall back to
/// unweighted ones.
pub const VISIBILITY_EPS: f64 = 1e-4;

/// Semi-occlusion budget of active planes.
pub const TAU_SEMI_OCCLUDED: u8 = 6;
/// Default budget of active planes.
pub const TAU_DEFAULT: u8 = 3;

/// One input image resampled onto every plane of the reference grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Psv {
    planes: Vec<Image>,
    source: Camera,
    reference: Camera,
    depths: DepthList,
}

impl Psv {
    /// 3-channel image of plane `d` on the reference grid.
    pub fn plane(&self, d: usize) -> &Image {
        &self.planes[d]
    }

    pub fn planes(&self) -> &[Image] {
        &self.planes
    }

    pub fn source(&self) -> &Camera {
        &self.source
    }

    pub fn reference(&self) -> &Camera {
        &self.reference
    }

    pub fn depths(&self) -> &DepthList {
        &self.depths
    }
}

/// Sweeps `image` (seen by `source`) over the reference planes: plane `d`
/// samples the source at `H(reference → source, d)·x` for each reference
/// pixel `x`.
pub fn build_psv(image: &Image, source: &Camera, reference: &Camera, depths: &DepthList) -> Result<Psv> {
    if image.width() != source.width() || image.height() != source.height() {
        return Err(Error::Shape("image does not match its camera"));
    }
    if image.channels() != 3 {
        return Err(Error::Shape("PSV input must be an RGB image"));
    }
    let planes = depths
        .iter()
        .map(|&depth| {
            let to_source = plane_homography(reference, source, depth)?;
            Ok(warp_with_inverse(
                image,
                &to_source,
                reference.width(),
                reference.height(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Psv {
        planes,
        source: source.clone(),
        reference: reference.clone(),
        depths: depths.clone(),
    })
}

/// Per-plane mean of the PSVs (the focal stack).
pub fn focal_stack(psvs: &[Psv]) -> Result<Vec<Image>> {
    let first = psvs.first().ok_or(Error::EmptyInput("PSV list"))?;
    let n = psvs.len() as f64;
    (0..first.planes.len())
        .map(|d| {
            let mut acc = Image::new(first.planes[d].width(), first.planes[d].height(), 3);
            for psv in psvs {
                let plane = psv.planes.get(d).ok_or(Error::Shape("PSVs differ in plane count"))?;
                if !plane.same_dims(&acc) {
                    return Err(Error::Shape("PSVs differ in grid size"));
                }
                for (a, v) in acc.data_mut().iter_mut().zip(plane.data()) {
                    *a += v;
                }
            }
            acc.data_mut().iter_mut().for_each(|a| *a /= n);
            Ok(acc)
        })
        .collect()
}

/// Transmittance from `view` to every reference-grid voxel: the product of
/// `1 - α̃_j(u)` over strictly nearer planes `j`, where `α̃_j` is plane `j`
/// warped into the view and `u` is the voxel's projection into the view.
pub fn visibility_volume(mpi: &Mpi, view: &Camera) -> Result<Vec<Image>> {
    let warped = warp_alpha_to_view(mpi, view)?;
    let (w, h) = (mpi.width(), mpi.height());
    let depth_count = mpi.depth_count();
    let mut out = Vec::with_capacity(depth_count);
    for d in 0..depth_count {
        let to_view = plane_homography(mpi.reference(), view, mpi.depths()[d])?;
        let mut vis = Image::new(w, h, 1);
        for y in 0..h {
            for x in 0..w {
                let (u, v) = to_view.apply(x as f64, y as f64);
                let t: f64 = warped[d + 1..]
                    .iter()
                    .map(|plane| 1.0 - plane.sample_scalar(u, v))
                    .product();
                vis.set(x, y, 0, t);
            }
        }
        out.push(vis);
    }
    Ok(out)
}

/// Total visibility `v̄`, visible mean color `μ` and visible color variance
/// `σ²` for every voxel of the reference grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CueVolume {
    depth_count: usize,
    width: usize,
    height: usize,
    view_count: usize,
    total_visibility: Vec<f64>,
    mean_color: Vec<f64>,
    color_variance: Vec<f64>,
}

impl CueVolume {
    /// Validates and wraps precomputed cues (`D×H×W`, `D×H×W×3`, `D×H×W`).
    pub fn new(
        dims: (usize, usize, usize),
        view_count: usize,
        total_visibility: Vec<f64>,
        mean_color: Vec<f64>,
        color_variance: Vec<f64>,
    ) -> Result<Self> {
        let (depth_count, width, height) = dims;
        let voxels = depth_count * width * height;
        if total_visibility.len() != voxels || mean_color.len() != voxels * 3 || color_variance.len() != voxels {
            return Err(Error::Shape("cue arrays do not match D×H×W"));
        }
        if view_count == 0 {
            return Err(Error::EmptyInput("views"));
        }
        let k = view_count as f64;
        if total_visibility.iter().any(|v| !(0.0..=k).contains(v)) {
            return Err(Error::OutOfRange("total visibility must lie in [0, K]"));
        }
        if color_variance.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::OutOfRange("color variance must be non-negative"));
        }
        Ok(CueVolume {
            depth_count,
            width,
            height,
            view_count,
            total_visibility,
            mean_color,
            color_variance,
        })
    }

    pub fn depth_count(&self) -> usize {
        self.depth_count
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of input views `K`.
    pub fn view_count(&self) -> usize {
        self.view_count
    }

    pub fn total_visibility(&self) -> &[f64] {
        &self.total_visibility
    }

    pub fn mean_color(&self) -> &[f64] {
        &self.mean_color
    }

    pub fn color_variance(&self) -> &[f64] {
        &self.color_variance
    }

    #[cfg(test)]
    pub(crate) fn uniform(mpi: &Mpi, view_count: usize, visibility: f64) -> Self {
        let voxels = mpi.voxel_count();
        CueVolume {
            depth_count: mpi.depth_count(),
            width: mpi.width(),
            height: mpi.height(),
            view_count,
            total_visibility: vec![visibility; voxels],
            mean_color: vec![0.5; voxels * 3],
            color_variance: vec![0.0; voxels],
        }
    }

    #[cfg(test)]
    pub(crate) fn color_variance_mut(&mut self) -> &mut [f64] {
        &mut self.color_variance
    }

    #[cfg(test)]
    pub(crate) fn mean_color_mut(&mut self) -> &mut [f64] {
        &mut self.mean_color
    }
}

/// Accumulates the visibility-weighted statistics over all views.
pub fn compute_cues(psvs: &[Psv], mpi: &Mpi, cameras: &[Camera]) -> Result<CueVolume> {
    if psvs.len() != cameras.len() {
        return Err(Error::Shape("one PSV per camera is required"));
    }
    if psvs.is_empty() {
        return Err(Error::EmptyInput("views"));
    }
    let (depth_count, w, h) = (mpi.depth_count(), mpi.width(), mpi.height());
    for psv in psvs {
        if psv.planes.len() != depth_count || psv.planes.iter().any(|p| p.width() != w || p.height() != h) {
            return Err(Error::Shape("PSV grid differs from the MPI grid"));
        }
    }
    let visibilities = cameras
        .iter()
        .map(|cam| visibility_volume(mpi, cam))
        .collect::<Result<Vec<_>>>()?;

    let k = psvs.len();
    let plane_px = w * h;
    let voxels = depth_count * plane_px;
    let mut total_visibility = vec![0.0; voxels];
    let mut mean_color = vec![0.0; voxels * 3];
    let mut color_variance = vec![0.0; voxels];
    for d in 0..depth_count {
        for p in 0..plane_px {
            let voxel = d * plane_px + p;
            let weight_sum: f64 = visibilities.iter().map(|v| v[d].data()[p]).sum();
            let (weights, norm): (Vec<f64>, f64) = if weight_sum < VISIBILITY_EPS {
                (vec![1.0; k], k as f64)
            } else {
                (visibilities.iter().map(|v| v[d].data()[p]).collect(), weight_sum)
            };
            let mut mean = [0.0; 3];
            for (psv, wgt) in psvs.iter().zip(&weights) {
                let c = &psv.planes[d].data()[p * 3..p * 3 + 3];
                for ch in 0..3 {
                    mean[ch] += wgt * c[ch];
                }
            }
            mean.iter_mut().for_each(|m| *m /= norm);
            let mut variance = 0.0;
            for (psv, wgt) in psvs.iter().zip(&weights) {
                let c = &psv.planes[d].data()[p * 3..p * 3 + 3];
                let dist2: f64 = (0..3).map(|ch| (c[ch] - mean[ch]) * (c[ch] - mean[ch])).sum();
                variance += wgt * dist2;
            }
            total_visibility[voxel] = weight_sum;
            mean_color[voxel * 3..voxel * 3 + 3].copy_from_slice(&mean);
            color_variance[voxel] = variance / (3.0 * norm);
        }
    }
    Ok(CueVolume {
        depth_count,
        width: w,
        height: h,
        view_count: k,
        total_visibility,
        mean_color,
        color_variance,
    })
}

/// Per-pixel budget of active planes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TauMap {
    width: usize,
    height: usize,
    values: Vec<u8>,
}

impl TauMap {
    /// Wraps explicit budgets; only 3 and 6 are accepted.
    pub fn new(width: usize, height: usize, values: Vec<u8>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::Shape("tau map does not match H×W"));
        }
        if values.iter().any(|&t| t != TAU_DEFAULT && t != TAU_SEMI_OCCLUDED) {
            return Err(Error::OutOfRange("tau values must be 3 or 6"));
        }
        Ok(TauMap { width, height, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.values[y * self.width + x]
    }
}

/// τ(x) = 6 when some voxel along the depth axis is seen by a strict subset
/// of the views (`1 < v̄ < K`), otherwise 3.
pub fn tau_map(cues: &CueVolume) -> TauMap {
    let k = cues.view_count as f64;
    let plane_px = cues.width * cues.height;
    let values = (0..plane_px)
        .map(|p| {
            let semi_occluded = (0..cues.depth_count).any(|d| {
                let v = cues.total_visibility[d * plane_px + p];
                v > 1.0 && v < k
            });
            if semi_occluded {
                TAU_SEMI_OCCLUDED
            } else {
                TAU_DEFAULT
            }
        })
        .collect();
    TauMap {
        width: cues.width,
        height: cues.height,
        values,
    }
}
