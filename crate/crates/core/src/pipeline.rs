//! End-to-end MPI construction: reference camera, plane sweep volumes,
//! M₀ and the heuristic refinement loop.

use alloc::vec::Vec;

use crate::compact::{default_thresholds, DEFAULT_LAMBDA};
use crate::cues::{build_psv, compute_cues, focal_stack, CueVolume, Psv};
use crate::error::{Error, Result};
use crate::geometry::{average_reference_camera, inverse_depth_samples, Camera, DepthList};
use crate::image::Image;
use crate::mpi::{heuristic_residual, init_mpi, refine_step, HeuristicParams, Mpi};

/// `K ≥ 2` calibrated input views.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    cameras: Vec<Camera>,
    images: Vec<Image>,
}

impl Scene {
    pub fn new(cameras: Vec<Camera>, images: Vec<Image>) -> Result<Self> {
        if cameras.len() != images.len() {
            return Err(Error::Shape("one image per camera is required"));
        }
        if cameras.len() < 2 {
            return Err(Error::InsufficientViews(cameras.len()));
        }
        for (cam, img) in cameras.iter().zip(&images) {
            if img.width() != cam.width() || img.height() != cam.height() || img.channels() != 3 {
                return Err(Error::Shape("image dimensions differ from the declared camera"));
            }
        }
        Ok(Scene { cameras, images })
    }

    pub fn cameras(&self) -> &[Camera] {
        &self.cameras
    }

    pub fn images(&self) -> &[Image] {
        &self.images
    }

    pub fn view_count(&self) -> usize {
        self.cameras.len()
    }

    /// Averaged reference camera of the rig.
    pub fn reference_camera(&self) -> Result<Camera> {
        average_reference_camera(&self.cameras)
    }

    /// One plane sweep volume per input view.
    pub fn plane_sweeps(&self, reference: &Camera, depths: &DepthList) -> Result<Vec<Psv>> {
        self.cameras
            .iter()
            .zip(&self.images)
            .map(|(cam, img)| build_psv(img, cam, reference, depths))
            .collect()
    }
}

/// Tunables of the pipeline with their defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Number of planes `D` (default 32).
    pub depth_count: usize,
    /// Nearest plane depth (default 1.0).
    pub near: f64,
    /// Farthest plane depth (default 100.0).
    pub far: f64,
    /// Refinement iterations (default 4).
    pub steps: usize,
    pub heuristic: HeuristicParams,
    /// Alpha thresholds of the occupancy sweep (default 20 values over `[0, 0.95]`).
    pub thresholds: Vec<f64>,
    /// Pruning floor of adaptive sampling (default 0.3).
    pub alpha_floor: f64,
    /// Sparsity weight in the total loss (default 0.1).
    pub lambda: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            depth_count: 32,
            near: 1.0,
            far: 100.0,
            steps: 4,
            heuristic: HeuristicParams::default(),
            thresholds: default_thresholds(20),
            alpha_floor: crate::adaptive::DEFAULT_ALPHA_FLOOR,
            lambda: DEFAULT_LAMBDA,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::OutOfRange("at least one refinement step is required"));
        }
        if !(0.0..=1.0).contains(&self.alpha_floor) {
            return Err(Error::OutOfRange("alpha floor must lie in [0, 1]"));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::OutOfRange("lambda must be finite and non-negative"));
        }
        let h = &self.heuristic;
        if !(h.variance_scale > 0.0) || !h.gain.is_finite() || !h.bias.is_finite() || !h.color_rate.is_finite() {
            return Err(Error::OutOfRange(
                "heuristic constants must be finite with a positive variance scale",
            ));
        }
        crate::compact::check_thresholds(&self.thresholds)?;
        self.regular_depths().map(|_| ())
    }

    /// Regular inverse-depth sampling between `near` and `far`.
    pub fn regular_depths(&self) -> Result<DepthList> {
        inverse_depth_samples(self.near, self.far, self.depth_count)
    }
}

/// M₀ from the focal stack of the given sweeps.
pub fn initial_mpi(psvs: &[Psv], reference: &Camera, depths: &DepthList) -> Result<Mpi> {
    init_mpi(&focal_stack(psvs)?, depths.clone(), reference.clone())
}

/// Cues of `mpi` against the scene's sweeps.
pub fn scene_cues(scene: &Scene, psvs: &[Psv], mpi: &Mpi) -> Result<CueVolume> {
    compute_cues(psvs, mpi, scene.cameras())
}

/// Runs M₀ followed by `steps` heuristic refinement iterations on the
/// given depth sampling.
pub fn build_mpi_with(
    scene: &Scene,
    reference: &Camera,
    depths: &DepthList,
    steps: usize,
    params: &HeuristicParams,
) -> Result<Mpi> {
    let psvs = scene.plane_sweeps(reference, depths)?;
    let mut mpi = initial_mpi(&psvs, reference, depths)?;
    for _ in 0..steps {
        let cues = scene_cues(scene, &psvs, &mpi)?;
        mpi = refine_step(&mpi, &cues, |c, m| heuristic_residual(c, m, params))?;
    }
    Ok(mpi)
}

/// [`build_mpi_with`] on the scene's averaged reference camera.
pub fn build_mpi(scene: &Scene, depths: &DepthList, steps: usize, params: &HeuristicParams) -> Result<Mpi> {
    let reference = scene.reference_camera()?;
    build_mpi_with(scene, &reference, depths, steps, params)
}
