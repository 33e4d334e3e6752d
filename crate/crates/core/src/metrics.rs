//! Image quality metrics.
//!
//! SSIM runs on Rec.601 luma with an 11×11 Gaussian window (σ = 1.5),
//! K1 = 0.01, K2 = 0.03 and a dynamic range of 1. Only window positions
//! fully inside the image contribute. Images smaller than the window use
//! the largest odd window that fits, with the truncated Gaussian
//! renormalized.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::math::{self, CompensatedSum};

pub const SSIM_RADIUS: usize = 5;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

const C1: f64 = (SSIM_K1 * 1.0) * (SSIM_K1 * 1.0);
const C2: f64 = (SSIM_K2 * 1.0) * (SSIM_K2 * 1.0);

/// SSIM, mean absolute error and PSNR of one image pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub ssim: f64,
    pub l1: f64,
    /// Infinite for identical images.
    pub psnr: f64,
}

fn check_dims(a: &Image, b: &Image) -> Result<()> {
    if a.same_dims(b) {
        Ok(())
    } else {
        Err(Error::Shape("images differ in size or channel count"))
    }
}

fn gaussian_kernel(radius: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            math::exp(-(d * d) / (2.0 * SSIM_SIGMA * SSIM_SIGMA))
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

// Separable "valid" convolution: output is (w - 2r) × (h - 2r).
fn blur_valid(data: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let size = kernel.len();
    let (ow, oh) = (w + 1 - size, h + 1 - size);
    let mut horizontal = Vec::with_capacity(ow * h);
    for y in 0..h {
        let row = &data[y * w..(y + 1) * w];
        for x in 0..ow {
            horizontal.push(kernel.iter().zip(&row[x..x + size]).map(|(k, v)| k * v).sum::<f64>());
        }
    }
    let mut out = Vec::with_capacity(ow * oh);
    for y in 0..oh {
        for x in 0..ow {
            out.push(
                kernel
                    .iter()
                    .enumerate()
                    .map(|(i, k)| k * horizontal[(y + i) * ow + x])
                    .sum::<f64>(),
            );
        }
    }
    out
}

/// Structural similarity of two images with values in `[0, 1]`.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    check_dims(a, b)?;
    let (w, h) = (a.width(), a.height());
    let radius = SSIM_RADIUS.min((w.min(h) - 1) / 2);
    let kernel = gaussian_kernel(radius);
    let x = a.luma().into_vec();
    let y = b.luma().into_vec();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();

    let mu_x = blur_valid(&x, w, h, &kernel);
    let mu_y = blur_valid(&y, w, h, &kernel);
    let e_xx = blur_valid(&xx, w, h, &kernel);
    let e_yy = blur_valid(&yy, w, h, &kernel);
    let e_xy = blur_valid(&xy, w, h, &kernel);

    let mut acc = CompensatedSum::default();
    for i in 0..mu_x.len() {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let var_x = e_xx[i] - mx * mx;
        let var_y = e_yy[i] - my * my;
        let cov = e_xy[i] - mx * my;
        let num = (2.0 * mx * my + C1) * (2.0 * cov + C2);
        let den = (mx * mx + my * my + C1) * (var_x + var_y + C2);
        acc.add(num / den);
    }
    Ok(acc.value() / mu_x.len() as f64)
}

/// Mean absolute difference over all samples.
pub fn l1(a: &Image, b: &Image) -> Result<f64> {
    check_dims(a, b)?;
    let sum: CompensatedSum = a.data().iter().zip(b.data()).map(|(p, q)| (p - q).abs()).collect();
    Ok(sum.value() / a.data().len() as f64)
}

/// Peak signal-to-noise ratio in dB for a unit dynamic range.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    check_dims(a, b)?;
    let sum: CompensatedSum = a.data().iter().zip(b.data()).map(|(p, q)| (p - q) * (p - q)).collect();
    let mse = sum.value() / a.data().len() as f64;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * math::log10(mse)
    })
}

pub fn evaluate(a: &Image, b: &Image) -> Result<MetricReport> {
    Ok(MetricReport {
        ssim: ssim(a, b)?,
        l1: l1(a, b)?,
        psnr: psnr(a, b)?,
    })
}

/// Loss stand-in for a perceptual distance: `L1 + (1 - SSIM) / 2`.
pub fn synthesis_error(rendered: &Image, gt: &Image) -> Result<f64> {
    Ok(l1(rendered, gt)? + (1.0 - ssim(rendered, gt)?) / 2.0)
}
