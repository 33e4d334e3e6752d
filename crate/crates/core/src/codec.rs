//! `.cmpi` container.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "CMPI" | version u16 = 1 | quantization u8 (0 = f32, 1 = u8) | D, H, W u32
//! depths: D × f32
//! camera: 21 × f32 (intrinsics row-major, rotation row-major, translation)
//! per plane, back to front:
//!   mask runs: u32 lengths alternating masked / unmasked, starting with a
//!              masked run (possibly 0), summing to H·W
//!   payload:   RGBα of every unmasked voxel in row-major order
//! ```
//!
//! Masked voxels are the explicit zeros written by thresholding; they cost
//! nothing beyond the run lengths and decode as all-zero RGBα, so any color
//! kept under a zeroed α is dropped.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{Camera, DepthList};
use crate::math;
use crate::mpi::Mpi;

pub const MAGIC: &[u8; 4] = b"CMPI";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 4 + 2 + 1 + 12;

// Tolerance for re-projecting an f32 rotation onto SO(3).
const ROTATION_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantization {
    F32,
    /// `round(v·255)`, decoded as `v/255`.
    U8,
}

impl Quantization {
    fn tag(self) -> u8 {
        match self {
            Quantization::F32 => 0,
            Quantization::U8 => 1,
        }
    }

    pub fn bytes_per_sample(self) -> usize {
        match self {
            Quantization::F32 => 4,
            Quantization::U8 => 1,
        }
    }
}

/// Alternating masked / unmasked run lengths of one plane's mask.
pub fn mask_runs(mask: &[bool]) -> Vec<u32> {
    let mut runs = vec![0u32];
    let mut current = true;
    for &m in mask {
        if m != current {
            runs.push(0);
            current = m;
        }
        *runs.last_mut().expect("runs start non-empty") += 1;
    }
    runs
}

pub fn encode_mpi(mpi: &Mpi, quantization: Quantization) -> Vec<u8> {
    let (d, w, h) = (mpi.depth_count(), mpi.width(), mpi.height());
    let unmasked = mpi.zero_mask().iter().filter(|&&m| !m).count();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * (d + 21) + unmasked * 4 * quantization.bytes_per_sample());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(quantization.tag());
    for dim in [d, h, w] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for &depth in mpi.depths().iter() {
        out.extend_from_slice(&(depth as f32).to_le_bytes());
    }
    let cam = mpi.reference();
    let k = cam.intrinsics();
    let r = cam.rotation();
    let t = cam.translation();
    let rows = |m: &Matrix3<f64>| -> [f64; 9] { core::array::from_fn(|i| m[(i / 3, i % 3)]) };
    for v in rows(k).into_iter().chain(rows(r)).chain(t.iter().copied()) {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }

    let plane_len = w * h;
    for plane in 0..d {
        let mask = &mpi.zero_mask()[plane * plane_len..(plane + 1) * plane_len];
        for run in mask_runs(mask) {
            out.extend_from_slice(&run.to_le_bytes());
        }
        for (i, _) in mask.iter().enumerate().filter(|(_, &m)| !m) {
            let voxel = plane * plane_len + i;
            for &v in &mpi.values()[voxel * 4..voxel * 4 + 4] {
                match quantization {
                    Quantization::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
                    Quantization::U8 => out.push(math::round(v * 255.0) as u8),
                }
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        let end = self
            .offset
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(Error::Format {
                offset: self.offset,
                reason: what,
            })?;
        let slice = &self.bytes[self.offset..end];
        self.offset = end;
        Ok(slice)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("two bytes")))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("four bytes")))
    }

    fn f32(&mut self, what: &'static str) -> Result<f64> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().expect("four bytes")) as f64)
    }

    fn error(&self, offset: usize, reason: &'static str) -> Error {
        Error::Format { offset, reason }
    }
}

/// Decodes a container. Any malformation, including trailing bytes, is a
/// format error carrying the offending byte offset.
pub fn decode_mpi(bytes: &[u8]) -> Result<Mpi> {
    let mut r = Reader { bytes, offset: 0 };
    if r.take(4, "truncated magic")? != MAGIC {
        return Err(r.error(0, "bad magic"));
    }
    if r.u16("truncated version")? != VERSION {
        return Err(r.error(4, "unsupported version"));
    }
    let quantization = match r.u8("truncated quantization tag")? {
        0 => Quantization::F32,
        1 => Quantization::U8,
        _ => return Err(r.error(6, "unknown quantization tag")),
    };
    let d = r.u32("truncated dimensions")? as usize;
    let h = r.u32("truncated dimensions")? as usize;
    let w = r.u32("truncated dimensions")? as usize;
    if d < 2 || w == 0 || h == 0 {
        return Err(r.error(7, "degenerate dimensions"));
    }
    let plane_len = w.checked_mul(h).ok_or(r.error(7, "dimensions overflow"))?;
    let voxels = plane_len.checked_mul(d).ok_or(r.error(7, "dimensions overflow"))?;
    // every plane needs at least one run length
    if bytes.len() < r.offset + 4 * (d + 21) + 4 * d {
        return Err(r.error(bytes.len(), "stream too short for the declared dimensions"));
    }

    let depth_offset = r.offset;
    let depths = (0..d)
        .map(|_| r.f32("truncated depths"))
        .collect::<Result<Vec<f64>>>()?;
    let depths = DepthList::new(depths).map_err(|_| r.error(depth_offset, "invalid depth list"))?;

    let camera_offset = r.offset;
    let mut cam = [0.0; 21];
    for v in cam.iter_mut() {
        *v = r.f32("truncated camera")?;
    }
    let k = Matrix3::from_row_slice(&cam[0..9]);
    let rot = Matrix3::from_row_slice(&cam[9..18]);
    let t = Vector3::new(cam[18], cam[19], cam[20]);
    let reference = Camera::new_orthonormalized(k, rot, t, w, h, ROTATION_TOLERANCE)
        .map_err(|_| r.error(camera_offset, "invalid camera"))?;

    let mut values = vec![0.0; voxels * 4];
    let mut mask = vec![true; voxels];
    for plane in 0..d {
        let mut position = 0usize;
        let mut masked = true;
        let mut unmasked_runs = Vec::new();
        while position < plane_len {
            let run_offset = r.offset;
            let run = r.u32("truncated mask runs")? as usize;
            if run > plane_len - position {
                return Err(r.error(run_offset, "mask runs exceed the plane size"));
            }
            if !masked {
                unmasked_runs.push((position, run));
            }
            position += run;
            masked = !masked;
        }
        for (start, run) in unmasked_runs {
            for i in start..start + run {
                let voxel = plane * plane_len + i;
                mask[voxel] = false;
                for c in 0..4 {
                    let sample_offset = r.offset;
                    let v = match quantization {
                        Quantization::F32 => r.f32("truncated payload")?,
                        Quantization::U8 => r.u8("truncated payload")? as f64 / 255.0,
                    };
                    if !(0.0..=1.0).contains(&v) {
                        return Err(r.error(sample_offset, "sample outside [0, 1]"));
                    }
                    values[voxel * 4 + c] = v;
                }
            }
        }
    }
    if r.offset != bytes.len() {
        return Err(r.error(r.offset, "trailing bytes"));
    }
    Mpi::from_values(values, mask, depths, reference)
}
