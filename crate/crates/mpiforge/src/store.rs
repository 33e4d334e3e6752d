//! `.cmpi` files and the web bundle consumed by the viewer.
//!
//! A bundle directory holds `manifest.json` and `atlas.png`. The atlas
//! packs the D planes as RGBA tiles on a grid of `ceil(sqrt(D))` columns,
//! row-major by plane index (plane 0, the farthest, top left). Unused
//! tiles are transparent black.

use std::fs;
use std::path::Path;

use mpiforge_core::codec::{decode_mpi, encode_mpi, Quantization};
use mpiforge_core::geometry::DepthList;
use mpiforge_core::image::Image;
use mpiforge_core::mpi::Mpi;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, io, Error, Result};
use crate::pngio;
use crate::rig::{write_json, CameraSpec};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const ATLAS_FILE: &str = "atlas.png";
pub const BUNDLE_FORMAT: &str = "mpiforge-bundle";

pub fn write_cmpi(path: &Path, mpi: &Mpi, quantization: Quantization) -> Result<()> {
    fs::write(path, encode_mpi(mpi, quantization)).map_err(io(path))
}

pub fn read_cmpi(path: &Path) -> Result<Mpi> {
    let bytes = fs::read(path).map_err(io(path))?;
    decode_mpi(&bytes).map_err(|e| invalid(path, e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtlasLayout {
    pub file: String,
    pub columns: usize,
    pub rows: usize,
    pub tile_width: usize,
    pub tile_height: usize,
}

impl AtlasLayout {
    pub fn for_planes(depth_count: usize, width: usize, height: usize) -> Self {
        let columns = (depth_count as f64).sqrt().ceil() as usize;
        AtlasLayout {
            file: ATLAS_FILE.to_string(),
            columns,
            rows: depth_count.div_ceil(columns),
            tile_width: width,
            tile_height: height,
        }
    }

    /// Top-left atlas pixel of plane `d`.
    pub fn tile_origin(&self, d: usize) -> (usize, usize) {
        (
            (d % self.columns) * self.tile_width,
            (d / self.columns) * self.tile_height,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub depth_count: usize,
    pub width: usize,
    pub height: usize,
    /// Plane depths, back to front.
    pub depths: Vec<f64>,
    /// Reference camera, in the rig camera schema.
    pub camera: CameraSpec,
    pub atlas: AtlasLayout,
}

pub fn atlas_image(mpi: &Mpi, layout: &AtlasLayout) -> Image {
    let mut atlas = Image::new(layout.columns * layout.tile_width, layout.rows * layout.tile_height, 4);
    for d in 0..mpi.depth_count() {
        let (ox, oy) = layout.tile_origin(d);
        for y in 0..mpi.height() {
            for x in 0..mpi.width() {
                atlas.pixel_mut(ox + x, oy + y).copy_from_slice(&mpi.rgba(d, x, y));
            }
        }
    }
    atlas
}

pub fn export_web_bundle(mpi: &Mpi, out_dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let layout = AtlasLayout::for_planes(mpi.depth_count(), mpi.width(), mpi.height());
    let manifest = Manifest {
        format: BUNDLE_FORMAT.to_string(),
        version: 1,
        depth_count: mpi.depth_count(),
        width: mpi.width(),
        height: mpi.height(),
        depths: mpi.depths().as_slice().to_vec(),
        camera: CameraSpec::from_camera(mpi.reference(), None),
        atlas: layout,
    };
    pngio::write_png(&out_dir.join(&manifest.atlas.file), &atlas_image(mpi, &manifest.atlas))?;
    write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Reads a bundle back into an MPI at 8-bit precision. Voxels with a zero
/// alpha byte come back masked.
pub fn import_web_bundle(dir: &Path) -> Result<Mpi> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(io(&manifest_path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: manifest_path.clone(),
        source,
    })?;
    let bad = |reason: &str| invalid(&manifest_path, reason);
    if manifest.format != BUNDLE_FORMAT || manifest.version != 1 {
        return Err(bad("unsupported bundle format"));
    }
    if manifest.depths.len() != manifest.depth_count {
        return Err(bad("depth list length differs from depth_count"));
    }
    let expected = AtlasLayout {
        file: manifest.atlas.file.clone(),
        ..AtlasLayout::for_planes(manifest.depth_count, manifest.width, manifest.height)
    };
    if manifest.atlas != expected {
        return Err(bad("atlas layout does not match the declared dimensions"));
    }
    if Path::new(&manifest.atlas.file).components().count() != 1 {
        return Err(bad("atlas file must sit next to the manifest"));
    }
    let depths = DepthList::new(manifest.depths.clone()).map_err(|e| bad(&e.to_string()))?;
    let camera = manifest.camera.to_camera().map_err(|e| bad(&e.to_string()))?;
    if camera.width() != manifest.width || camera.height() != manifest.height {
        return Err(bad("camera dimensions differ from the bundle dimensions"));
    }

    let atlas_path = dir.join(&manifest.atlas.file);
    let atlas = pngio::read_rgba8(&atlas_path)?;
    let layout = &manifest.atlas;
    if atlas.width() != layout.columns * layout.tile_width || atlas.height() != layout.rows * layout.tile_height {
        return Err(invalid(&atlas_path, "atlas size does not match the manifest"));
    }
    let (d, w, h) = (manifest.depth_count, manifest.width, manifest.height);
    let mut values = Vec::with_capacity(d * w * h * 4);
    let mut mask = Vec::with_capacity(d * w * h);
    for plane in 0..d {
        let (ox, oy) = layout.tile_origin(plane);
        for y in 0..h {
            for x in 0..w {
                let px = atlas.pixel(ox + x, oy + y);
                mask.push(px[3] == 0.0);
                values.extend_from_slice(px);
            }
        }
    }
    Ok(Mpi::from_values(values, mask, depths, camera)?)
}
