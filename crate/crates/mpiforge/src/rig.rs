//! Rig configs and pose files.
//!
//! A rig is a JSON array of camera objects, or an object with a `cameras`
//! array. A pose file is a single camera object. Image paths are relative
//! to the JSON file.

use std::fs;
use std::path::{Path, PathBuf};

use mpiforge_core::geometry::Camera;
use mpiforge_core::image::Image;
use mpiforge_core::pipeline::Scene;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, io, Error, Result};
use crate::pngio;

/// Accepted deviation from orthonormality before a rotation is
/// re-projected onto SO(3).
pub const ROTATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    /// Row-major 3×3 intrinsics.
    pub intrinsics: [f64; 9],
    /// Row-major world-to-camera rotation.
    pub rotation: [f64; 9],
    /// World-to-camera translation, `x_cam = R·x_world + t`.
    pub translation: [f64; 3],
    pub width: usize,
    pub height: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RigFile {
    List(Vec<CameraSpec>),
    Object { cameras: Vec<CameraSpec> },
}

impl CameraSpec {
    pub fn from_camera(camera: &Camera, image: Option<String>) -> Self {
        let rows = |m: &Matrix3<f64>| {
            let mut out = [0.0; 9];
            for i in 0..3 {
                for j in 0..3 {
                    out[3 * i + j] = m[(i, j)];
                }
            }
            out
        };
        let t = camera.translation();
        CameraSpec {
            intrinsics: rows(camera.intrinsics()),
            rotation: rows(camera.rotation()),
            translation: [t.x, t.y, t.z],
            width: camera.width(),
            height: camera.height(),
            image,
        }
    }

    pub fn to_camera(&self) -> mpiforge_core::error::Result<Camera> {
        Camera::new_orthonormalized(
            Matrix3::from_row_slice(&self.intrinsics),
            Matrix3::from_row_slice(&self.rotation),
            Vector3::from_row_slice(&self.translation),
            self.width,
            self.height,
            ROTATION_TOLERANCE,
        )
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io(path))
}

/// Cameras of a rig with their resolved image paths.
pub fn load_rig(path: &Path) -> Result<Vec<(Camera, Option<PathBuf>)>> {
    let specs = match read_json::<RigFile>(path)? {
        RigFile::List(specs) | RigFile::Object { cameras: specs } => specs,
    };
    let base = path.parent().unwrap_or(Path::new("."));
    specs
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let camera = spec
                .to_camera()
                .map_err(|e| invalid(path, format!("camera {i}: {e}")))?;
            Ok((camera, spec.image.as_ref().map(|p| base.join(p))))
        })
        .collect()
}

/// Cameras and images of a rig, ready for the pipeline.
pub fn load_views(path: &Path) -> Result<Vec<(Camera, Image)>> {
    load_rig(path)?
        .into_iter()
        .enumerate()
        .map(|(i, (camera, image))| {
            let image_path = image.ok_or_else(|| invalid(path, format!("camera {i} has no image")))?;
            let img = pngio::read_rgb(&image_path)?;
            if img.width() != camera.width() || img.height() != camera.height() {
                return Err(invalid(
                    &image_path,
                    format!(
                        "image is {}×{} but camera {i} declares {}×{}",
                        img.width(),
                        img.height(),
                        camera.width(),
                        camera.height()
                    ),
                ));
            }
            Ok((camera, img))
        })
        .collect()
}

/// Loads a rig config with its images; at least two views are required.
pub fn load_scene(path: &Path) -> Result<Scene> {
    let views = load_views(path)?;
    let (cameras, images) = views.into_iter().unzip();
    Ok(Scene::new(cameras, images)?)
}

pub fn load_pose(path: &Path) -> Result<Camera> {
    let spec: CameraSpec = read_json(path)?;
    spec.to_camera().map_err(|e| invalid(path, e.to_string()))
}

pub fn write_rig(path: &Path, cameras: &[CameraSpec]) -> Result<()> {
    write_json(path, &serde_json::json!({ "cameras": cameras }))
}
