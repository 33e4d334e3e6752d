//! Dense interleaved `f64` images.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Row-major interleaved image with `channels` samples per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Image {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::Shape("image dimensions must be positive"));
        }
        if data.len() != width * height * channels {
            return Err(Error::Shape("image buffer length does not match dimensions"));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds an image by evaluating `f(x, y, channel)` at every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Image {
            width,
            height,
            channels,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: f64) {
        self.data[(y * self.width + x) * self.channels + c] = value;
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let start = (y * self.width + x) * self.channels;
        &self.data[start..start + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let start = (y * self.width + x) * self.channels;
        &mut self.data[start..start + self.channels]
    }

    pub fn same_dims(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Bilinear sample at continuous pixel coordinates (pixel centres sit on
    /// integers). Coordinates outside the image are clamped to the border.
    pub fn sample_bilinear(&self, x: f64, y: f64, out: &mut [f64]) {
        let (x0, x1, fx) = clamp_axis(x, self.width);
        let (y0, y1, fy) = clamp_axis(y, self.height);
        let c = self.channels;
        let row0 = y0 * self.width;
        let row1 = y1 * self.width;
        for (ch, o) in out.iter_mut().enumerate().take(c) {
            let p00 = self.data[(row0 + x0) * c + ch];
            let p10 = self.data[(row0 + x1) * c + ch];
            let p01 = self.data[(row1 + x0) * c + ch];
            let p11 = self.data[(row1 + x1) * c + ch];
            let top = lerp(p00, p10, fx);
            let bottom = lerp(p01, p11, fx);
            *o = lerp(top, bottom, fy);
        }
    }

    /// Single-channel convenience wrapper around [`Image::sample_bilinear`].
    pub fn sample_scalar(&self, x: f64, y: f64) -> f64 {
        let mut v = [0.0];
        self.sample_bilinear(x, y, &mut v);
        v[0]
    }

    /// Rec.601 luma of a 3-channel image; single-channel images are copied.
    pub fn luma(&self) -> Image {
        match self.channels {
            1 => self.clone(),
            _ => {
                let data = self
                    .data
                    .chunks_exact(self.channels)
                    .map(|p| LUMA_WEIGHTS[0] * p[0] + LUMA_WEIGHTS[1] * p[1] + LUMA_WEIGHTS[2] * p[2])
                    .collect();
                Image {
                    width: self.width,
                    height: self.height,
                    channels: 1,
                    data,
                }
            }
        }
    }
}

/// Rec.601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

// `a + t * (b - a)` keeps constant neighbourhoods exact.
#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

#[inline]
fn clamp_axis(v: f64, len: usize) -> (usize, usize, f64) {
    let max = (len - 1) as f64;
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, max) };
    let i0 = math::floor(v);
    let frac = v - i0;
    let i0 = i0 as usize;
    let i1 = if i0 + 1 < len { i0 + 1 } else { i0 };
    (i0, i1, frac)
}
