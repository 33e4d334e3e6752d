//! Seeded synthetic Lambertian scenes made of textured fronto-parallel
//! layers, rendered exactly by ray casting. Used as fixtures with known
//! geometry.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::geometry::{inverse_depth_samples, Camera, DepthList};
use crate::image::Image;
use crate::pipeline::Scene;

/// Value-noise colour pattern: random colours on a square lattice,
/// bilinearly interpolated, addressed in reference-image pixels. The
/// lattice covers three image extents around the reference view and
/// clamps beyond.
#[derive(Debug, Clone, PartialEq)]
pub struct Texture {
    cell: f64,
    origin: (f64, f64),
    lattice: Image,
}

impl Texture {
    /// Random texture for a `width`×`height` reference view with lattice
    /// spacing `cell` pixels and values in `[0.05, 0.95]`.
    pub fn random(rng: &mut ChaCha8Rng, width: usize, height: usize, cell: f64) -> Self {
        let origin = (-(width as f64), -(height as f64));
        let cols = libm::ceil(3.0 * width as f64 / cell) as usize + 2;
        let rows = libm::ceil(3.0 * height as f64 / cell) as usize + 2;
        let lattice = Image::from_fn(cols, rows, 3, |_, _, _| rng.random_range(0.05..=0.95));
        Texture { cell, origin, lattice }
    }

    pub fn constant(color: [f64; 3]) -> Self {
        Texture {
            cell: 1.0,
            origin: (0.0, 0.0),
            lattice: Image::from_fn(1, 1, 3, |_, _, c| color[c]),
        }
    }

    pub fn sample(&self, u: f64, v: f64) -> [f64; 3] {
        let mut out = [0.0; 3];
        self.lattice.sample_bilinear(
            (u - self.origin.0) / self.cell,
            (v - self.origin.1) / self.cell,
            &mut out,
        );
        out
    }
}

/// Textured plane at constant depth in the scene's reference frame,
/// optionally bounded by a rectangle in reference pixels `[x0, y0, x1, y1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub depth: f64,
    pub rect: Option<[f64; 4]>,
    pub texture: Texture,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    reference: Camera,
    // nearest first
    layers: Vec<Layer>,
}

impl SyntheticScene {
    pub fn new(reference: Camera, mut layers: Vec<Layer>) -> Self {
        layers.sort_by(|a, b| a.depth.total_cmp(&b.depth));
        SyntheticScene { reference, layers }
    }

    pub fn reference(&self) -> &Camera {
        &self.reference
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Exact RGB image of the scene seen by `camera`; pixels hitting no
    /// layer are black.
    pub fn render(&self, camera: &Camera) -> Image {
        let k_inv = camera.intrinsics_inverse();
        let r_t = camera.rotation().transpose();
        let origin = camera.center();
        let r_ref = self.reference.rotation();
        let o = r_ref * origin + self.reference.translation();
        let mut image = Image::new(camera.width(), camera.height(), 3);
        for y in 0..camera.height() {
            for x in 0..camera.width() {
                let dir = r_ref * (r_t * (k_inv * Vector3::new(x as f64, y as f64, 1.0)));
                if let Some(color) = self.trace(&o, &dir) {
                    image.pixel_mut(x, y).copy_from_slice(&color);
                }
            }
        }
        image
    }

    // Ray in the reference frame.
    fn trace(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<[f64; 3]> {
        if dir.z.abs() < 1e-12 {
            return None;
        }
        let k = self.reference.intrinsics();
        for layer in &self.layers {
            let s = (layer.depth - origin.z) / dir.z;
            if s <= 0.0 {
                continue;
            }
            let p = origin + dir * s;
            let u = k[(0, 0)] * p.x / p.z + k[(0, 1)] * p.y / p.z + k[(0, 2)];
            let v = k[(1, 1)] * p.y / p.z + k[(1, 2)];
            if let Some([x0, y0, x1, y1]) = layer.rect {
                if u < x0 || u > x1 || v < y0 || v > y1 {
                    continue;
                }
            }
            return Some(layer.texture.sample(u, v));
        }
        None
    }
}

/// Image size, optics and camera rig of a synthetic setup.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub width: usize,
    pub height: usize,
    pub focal: f64,
    /// Input cameras sit at `(±baseline, ±baseline, 0)`.
    pub baseline: f64,
    /// Held-out camera position as a fraction of the baseline, per axis.
    pub held_out: (f64, f64),
    pub near: f64,
    pub far: f64,
    pub depth_count: usize,
    /// Texture lattice spacing in reference pixels.
    pub cell: f64,
    /// Background and foreground positions in units of regular plane
    /// index (0 is the farthest plane, fractions fall between planes).
    pub surfaces: (f64, f64),
    /// Foreground rectangle `[x0, y0, x1, y1]` as fractions of the
    /// reference image size.
    pub foreground: [f64; 4],
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            width: 64,
            height: 48,
            focal: 64.0,
            baseline: 0.3,
            held_out: (0.35, -0.55),
            near: 2.0,
            far: 12.0,
            depth_count: 10,
            cell: 5.0,
            surfaces: (0.5, 1.0),
            foreground: [0.3, 0.25, 0.7, 0.75],
        }
    }
}

impl SyntheticConfig {
    pub fn reference(&self) -> Result<Camera> {
        Camera::pinhole(
            self.focal,
            self.width,
            self.height,
            Matrix3::identity(),
            Vector3::zeros(),
        )
    }

    fn camera_at(&self, x: f64, y: f64) -> Result<Camera> {
        let reference = self.reference()?;
        Camera::with_center(
            *reference.intrinsics(),
            Matrix3::identity(),
            Vector3::new(x, y, 0.0),
            self.width,
            self.height,
        )
    }

    /// The four input cameras on a square around the reference.
    pub fn input_cameras(&self) -> Result<Vec<Camera>> {
        let b = self.baseline;
        [(-b, -b), (b, -b), (-b, b), (b, b)]
            .iter()
            .map(|&(x, y)| self.camera_at(x, y))
            .collect()
    }

    pub fn held_out_camera(&self) -> Result<Camera> {
        self.camera_at(self.held_out.0 * self.baseline, self.held_out.1 * self.baseline)
    }

    /// Regular inverse-depth sampling of the configured range.
    pub fn regular_depths(&self) -> Result<DepthList> {
        inverse_depth_samples(self.near, self.far, self.depth_count)
    }

    /// Inverse-depth spacing of the regular sampling.
    pub fn inverse_step(&self) -> f64 {
        (1.0 / self.near - 1.0 / self.far) / (self.depth_count - 1) as f64
    }

    /// Depth at fractional plane index `position` of the regular
    /// sampling, interpolated in inverse depth.
    pub fn depth_at(&self, position: f64) -> f64 {
        1.0 / (1.0 / self.far + self.inverse_step() * position)
    }

    fn texture(&self, rng: &mut ChaCha8Rng) -> Texture {
        Texture::random(rng, self.width, self.height, self.cell)
    }
}

/// A synthetic scene together with its capture rig.
#[derive(Debug, Clone)]
pub struct SyntheticSetup {
    pub config: SyntheticConfig,
    pub model: SyntheticScene,
    pub cameras: Vec<Camera>,
    pub held_out: Camera,
    /// Depths of the true surfaces, far to near.
    pub surface_depths: Vec<f64>,
}

impl SyntheticSetup {
    pub fn new(config: SyntheticConfig, model: SyntheticScene) -> Result<Self> {
        let cameras = config.input_cameras()?;
        let held_out = config.held_out_camera()?;
        let mut surface_depths: Vec<f64> = model.layers().iter().map(|l| l.depth).collect();
        surface_depths.reverse();
        Ok(SyntheticSetup {
            config,
            model,
            cameras,
            held_out,
            surface_depths,
        })
    }

    /// Input images rendered from the rig.
    pub fn scene(&self) -> Result<Scene> {
        let images = self.cameras.iter().map(|c| self.model.render(c)).collect();
        Scene::new(self.cameras.clone(), images)
    }

    pub fn held_out_image(&self) -> Image {
        self.model.render(&self.held_out)
    }

    /// Inverse-depth bands: each true surface ± one regular inverse-depth step.
    pub fn inverse_depth_bands(&self) -> Vec<(f64, f64)> {
        let step = self.config.inverse_step();
        self.surface_depths
            .iter()
            .map(|d| (1.0 / d - step, 1.0 / d + step))
            .collect()
    }

    /// Fraction of `depths` inside the union of the surface bands.
    pub fn fraction_in_bands(&self, depths: &DepthList) -> f64 {
        let bands = self.inverse_depth_bands();
        let inside = depths
            .iter()
            .filter(|&&d| bands.iter().any(|&(lo, hi)| (lo..=hi).contains(&(1.0 / d))))
            .count();
        inside as f64 / depths.len() as f64
    }
}

/// Textured background filling the view plus a textured foreground
/// rectangle over the central part of the reference image, at the
/// configured surface positions.
pub fn two_plane(config: &SyntheticConfig, seed: u64) -> Result<SyntheticSetup> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (config.width as f64, config.height as f64);
    let f = config.foreground;
    let layers = vec![
        Layer {
            depth: config.depth_at(config.surfaces.0),
            rect: None,
            texture: config.texture(&mut rng),
        },
        Layer {
            depth: config.depth_at(config.surfaces.1),
            rect: Some([f[0] * w, f[1] * h, f[2] * w, f[3] * h]),
            texture: config.texture(&mut rng),
        },
    ];
    SyntheticSetup::new(config.clone(), SyntheticScene::new(config.reference()?, layers))
}

/// One textured plane filling the view at `depth`.
pub fn single_plane(config: &SyntheticConfig, depth: f64, seed: u64) -> Result<SyntheticSetup> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = vec![Layer {
        depth,
        rect: None,
        texture: config.texture(&mut rng),
    }];
    SyntheticSetup::new(config.clone(), SyntheticScene::new(config.reference()?, layers))
}

/// Lateral pixel shift of content at `depth` seen from a camera displaced
/// by `offset` along x.
pub fn parallax(focal: f64, offset: f64, depth: f64) -> f64 {
    focal * offset / depth
}
