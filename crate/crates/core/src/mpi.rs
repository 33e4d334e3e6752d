//! The multiplane image container, its initialization, rendering and the
//! iterative logit-space refinement step.

use alloc::vec;
use alloc::vec::Vec;

use crate::cues::CueVolume;
use crate::error::{Error, Result};
use crate::geometry::{plane_homography, Camera, DepthList};
use crate::image::Image;
use crate::math::{self, LOGIT_EPS};

/// Stack of `D` fronto-parallel RGBα planes seen from a reference camera.
///
/// The state lives in logit space; `values` caches the sigmoid of the
/// logits. Voxels flagged in `zero_mask` materialize as exactly `0` on all
/// four channels. Plane 0 is the farthest.
#[derive(Debug, Clone, PartialEq)]
pub struct Mpi {
    depths: DepthList,
    reference: Camera,
    logits: Vec<f64>,
    values: Vec<f64>,
    zero_mask: Vec<bool>,
}

impl Mpi {
    /// Builds an MPI from a `D×H×W×4` logit volume on the reference grid.
    pub fn from_logits(logits: Vec<f64>, depths: DepthList, reference: Camera) -> Result<Self> {
        let voxels = depths.len() * reference.width() * reference.height();
        if logits.len() != voxels * 4 {
            return Err(Error::Shape("logit volume does not match D×H×W×4"));
        }
        if logits.iter().any(|v| v.is_nan()) {
            return Err(Error::Numeric("logits"));
        }
        let values = logits.iter().map(|&l| math::sigmoid(l)).collect();
        Ok(Mpi {
            depths,
            reference,
            logits,
            values,
            zero_mask: vec![false; voxels],
        })
    }

    /// Builds an MPI from materialized `[0, 1]` values and a zero mask, as
    /// produced by a decoder. Masked voxels are forced to zero.
    pub fn from_values(
        mut values: Vec<f64>,
        zero_mask: Vec<bool>,
        depths: DepthList,
        reference: Camera,
    ) -> Result<Self> {
        let voxels = depths.len() * reference.width() * reference.height();
        if values.len() != voxels * 4 || zero_mask.len() != voxels {
            return Err(Error::Shape("value volume does not match D×H×W×4"));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::OutOfRange("materialized values must lie in [0, 1]"));
        }
        for (voxel, _) in zero_mask.iter().enumerate().filter(|(_, &m)| m) {
            values[voxel * 4..voxel * 4 + 4].fill(0.0);
        }
        let logits = values.iter().map(|&v| math::logit_clamped(v, LOGIT_EPS)).collect();
        Ok(Mpi {
            depths,
            reference,
            logits,
            values,
            zero_mask,
        })
    }

    pub fn depth_count(&self) -> usize {
        self.depths.len()
    }

    pub fn width(&self) -> usize {
        self.reference.width()
    }

    pub fn height(&self) -> usize {
        self.reference.height()
    }

    pub fn voxel_count(&self) -> usize {
        self.depth_count() * self.width() * self.height()
    }

    pub fn depths(&self) -> &DepthList {
        &self.depths
    }

    pub fn reference(&self) -> &Camera {
        &self.reference
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    /// Materialized `D×H×W×4` volume.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn zero_mask(&self) -> &[bool] {
        &self.zero_mask
    }

    #[inline]
    pub fn voxel_index(&self, d: usize, x: usize, y: usize) -> usize {
        (d * self.height() + y) * self.width() + x
    }

    #[inline]
    pub fn alpha(&self, d: usize, x: usize, y: usize) -> f64 {
        self.values[self.voxel_index(d, x, y) * 4 + 3]
    }

    #[inline]
    pub fn rgba(&self, d: usize, x: usize, y: usize) -> [f64; 4] {
        let i = self.voxel_index(d, x, y) * 4;
        [
            self.values[i],
            self.values[i + 1],
            self.values[i + 2],
            self.values[i + 3],
        ]
    }

    /// Materialized RGBα of plane `d` as a 4-channel image.
    pub fn plane(&self, d: usize) -> Image {
        let n = self.width() * self.height() * 4;
        let data = self.values[d * n..(d + 1) * n].to_vec();
        Image::from_vec(self.width(), self.height(), 4, data).expect("plane dims are consistent")
    }

    /// Materialized α of plane `d` as a 1-channel image.
    pub fn alpha_plane(&self, d: usize) -> Image {
        let n = self.width() * self.height();
        let data = self.values[d * n * 4..(d + 1) * n * 4]
            .chunks_exact(4)
            .map(|p| p[3])
            .collect();
        Image::from_vec(self.width(), self.height(), 1, data).expect("plane dims are consistent")
    }

    /// Same MPI with α forced to exactly zero on the given voxels. Color
    /// stays: with independent color and α resampling, a zeroed color would
    /// bleed black into neighbouring pixels.
    pub(crate) fn with_zeroed(&self, zero_mask: Vec<bool>) -> Mpi {
        let mut values = self.values.clone();
        for (voxel, _) in zero_mask.iter().enumerate().filter(|(_, &m)| m) {
            values[voxel * 4 + 3] = 0.0;
        }
        Mpi {
            depths: self.depths.clone(),
            reference: self.reference.clone(),
            logits: self.logits.clone(),
            values,
            zero_mask,
        }
    }
}

/// Additive logit-space update with the same `D×H×W×4` layout as an [`Mpi`].
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    depth_count: usize,
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Residual {
    pub fn new(depth_count: usize, width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != depth_count * width * height * 4 {
            return Err(Error::Shape("residual does not match D×H×W×4"));
        }
        Ok(Residual {
            depth_count,
            width,
            height,
            values,
        })
    }

    pub fn zeros_like(mpi: &Mpi) -> Self {
        Residual {
            depth_count: mpi.depth_count(),
            width: mpi.width(),
            height: mpi.height(),
            values: vec![0.0; mpi.voxel_count() * 4],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// M₀: colors from the per-plane mean colors (the focal stack), α = 1 on
/// the farthest plane and α = 0 elsewhere, both through the ε logit clamp.
pub fn init_mpi(mean_colors: &[Image], depths: DepthList, reference: Camera) -> Result<Mpi> {
    if mean_colors.len() != depths.len() {
        return Err(Error::Shape("one mean-color image per depth is required"));
    }
    let (w, h) = (reference.width(), reference.height());
    if mean_colors
        .iter()
        .any(|img| img.width() != w || img.height() != h || img.channels() != 3)
    {
        return Err(Error::Shape("mean colors must be H×W×3 on the reference grid"));
    }
    let opaque = math::logit_clamped(1.0, LOGIT_EPS);
    let transparent = math::logit_clamped(0.0, LOGIT_EPS);
    let mut logits = Vec::with_capacity(depths.len() * w * h * 4);
    for (d, img) in mean_colors.iter().enumerate() {
        let alpha = if d == 0 { opaque } else { transparent };
        for px in img.data().chunks_exact(3) {
            logits.extend(px.iter().map(|&c| math::logit_clamped(c, LOGIT_EPS)));
            logits.push(alpha);
        }
    }
    Mpi::from_logits(logits, depths, reference)
}

/// Back-to-front over compositing of the planes at the reference view.
pub fn composite_over(mpi: &Mpi) -> Image {
    let (w, h) = (mpi.width(), mpi.height());
    let mut out = Image::new(w, h, 3);
    for d in 0..mpi.depth_count() {
        for y in 0..h {
            for x in 0..w {
                let [r, g, b, a] = mpi.rgba(d, x, y);
                over(out.pixel_mut(x, y), [r, g, b], a);
            }
        }
    }
    out
}

/// Per-plane compositing weights `α_d · Π_{j>d} (1 - α_j)` of a back-to-front
/// alpha stack, and the residual transmittance `Π_j (1 - α_j)`.
pub fn compositing_weights(alphas: &[Image]) -> (Vec<Image>, Image) {
    let (w, h) = alphas.first().map_or((0, 0), |a| (a.width(), a.height()));
    let mut transmittance = Image::filled(w, h, 1, 1.0);
    let mut weights = alloc::vec![Image::new(w, h, 1); alphas.len()];
    for (d, alpha) in alphas.iter().enumerate().rev() {
        for (i, (&a, t)) in alpha.data().iter().zip(transmittance.data_mut()).enumerate() {
            weights[d].data_mut()[i] = a * *t;
            *t *= 1.0 - a;
        }
    }
    (weights, transmittance)
}

#[inline]
fn over(acc: &mut [f64], color: [f64; 3], alpha: f64) {
    for (dst, c) in acc.iter_mut().zip(color) {
        *dst = c * alpha + (1.0 - alpha) * *dst;
    }
}

/// Renders the MPI at `target` by warping every RGBα plane through its
/// plane homography and compositing back to front. Color and α are
/// resampled independently (no premultiplication).
pub fn render_view(mpi: &Mpi, target: &Camera) -> Result<Image> {
    let (w, h) = (target.width(), target.height());
    let mut out = Image::new(w, h, 3);
    let mut sample = [0.0; 4];
    for d in 0..mpi.depth_count() {
        let to_reference = plane_homography(mpi.reference(), target, mpi.depths()[d])?.inverse()?;
        let plane = mpi.plane(d);
        for y in 0..h {
            for x in 0..w {
                let (sx, sy) = to_reference.apply(x as f64, y as f64);
                plane.sample_bilinear(sx, sy, &mut sample);
                over(out.pixel_mut(x, y), [sample[0], sample[1], sample[2]], sample[3]);
            }
        }
    }
    Ok(out)
}

/// Each α plane warped at its own depth into the image grid of `view`.
pub fn warp_alpha_to_view(mpi: &Mpi, view: &Camera) -> Result<Vec<Image>> {
    (0..mpi.depth_count())
        .map(|d| {
            let to_reference = plane_homography(mpi.reference(), view, mpi.depths()[d])?.inverse()?;
            Ok(crate::geometry::warp_with_inverse(
                &mpi.alpha_plane(d),
                &to_reference,
                view.width(),
                view.height(),
            ))
        })
        .collect()
}

/// One refinement iteration: `logits += residual_fn(cues, mpi)`, then the
/// sigmoid re-materializes the volume. A zero residual leaves the logits
/// bit-identical. The zero mask is carried over.
pub fn refine_step<F>(mpi: &Mpi, cues: &CueVolume, residual_fn: F) -> Result<Mpi>
where
    F: FnOnce(&CueVolume, &Mpi) -> Residual,
{
    let residual = residual_fn(cues, mpi);
    if residual.depth_count != mpi.depth_count() || residual.width != mpi.width() || residual.height != mpi.height() {
        return Err(Error::Shape("residual dimensions differ from the MPI"));
    }
    if residual.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("residual"));
    }
    let logits = mpi.logits.iter().zip(&residual.values).map(|(l, r)| l + r).collect();
    let next = Mpi::from_logits(logits, mpi.depths.clone(), mpi.reference.clone())?;
    Ok(next.with_zeroed(mpi.zero_mask.clone()))
}

/// Constants of the photo-consistency heuristic that stands in for a
/// learned residual network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeuristicParams {
    /// Alpha logit gain.
    pub gain: f64,
    /// Variance scale of the consistency kernel `exp(-σ²/s)`.
    pub variance_scale: f64,
    /// Consistency level below which alpha is pushed down.
    pub bias: f64,
    /// Fraction of the logit gap to the mean visible color closed per step.
    pub color_rate: f64,
}

impl Default for HeuristicParams {
    fn default() -> Self {
        HeuristicParams {
            gain: 16.0,
            variance_scale: 0.003,
            bias: 0.5,
            color_rate: 0.5,
        }
    }
}

/// Deterministic residual: α logits move by
/// `gain * (exp(-σ²/s) * v̄/K - bias)` and color logits move a
/// `color_rate` fraction of the way towards `logit(μ)`.
pub fn heuristic_residual(cues: &CueVolume, mpi: &Mpi, params: &HeuristicParams) -> Residual {
    let k = cues.view_count() as f64;
    let voxels = mpi.voxel_count();
    let mut values = Vec::with_capacity(voxels * 4);
    for v in 0..voxels {
        let mean = &cues.mean_color()[v * 3..v * 3 + 3];
        for (&m, &logit) in mean.iter().zip(&mpi.logits[v * 4..v * 4 + 3]) {
            values.push(params.color_rate * (math::logit_clamped(m, LOGIT_EPS) - logit));
        }
        let consistency = math::exp(-cues.color_variance()[v] / params.variance_scale) * cues.total_visibility()[v] / k;
        values.push(params.gain * (consistency - params.bias));
    }
    Residual {
        depth_count: mpi.depth_count(),
        width: mpi.width(),
        height: mpi.height(),
        values,
    }
}
