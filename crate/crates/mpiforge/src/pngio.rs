//! PNG reading and writing. Samples are normalized to `[0, 1]`.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Rgb, Rgba};
use mpiforge_core::image::Image;

use crate::error::{invalid, Error, Result};

fn image_error(path: &Path) -> impl FnOnce(image::ImageError) -> Error + '_ {
    move |source| Error::Image {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads an 8- or 16-bit PNG as RGB. Grey is expanded, alpha dropped.
pub fn read_rgb(path: &Path) -> Result<Image> {
    let reader = image::ImageReader::open(path)
        .map_err(crate::error::io(path))?
        .with_guessed_format()
        .map_err(crate::error::io(path))?;
    let decoded = reader.decode().map_err(image_error(path))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let data: Vec<f64> = match decoded {
        DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA16(_)
        | DynamicImage::ImageRgb16(_)
        | DynamicImage::ImageRgba16(_) => decoded
            .to_rgb16()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 65535.0)
            .collect(),
        DynamicImage::ImageLuma8(_)
        | DynamicImage::ImageLumaA8(_)
        | DynamicImage::ImageRgb8(_)
        | DynamicImage::ImageRgba8(_) => decoded
            .to_rgb8()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 255.0)
            .collect(),
        _ => return Err(invalid(path, "only 8- and 16-bit images are supported")),
    };
    Ok(Image::from_vec(w, h, 3, data)?)
}

pub fn read_rgba8(path: &Path) -> Result<Image> {
    let decoded = image::open(path).map_err(image_error(path))?.to_rgba8();
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let data = decoded.into_raw().into_iter().map(|v| v as f64 / 255.0).collect();
    Ok(Image::from_vec(w, h, 4, data)?)
}

pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes a 3- or 4-channel image as an 8-bit PNG.
pub fn write_png(path: &Path, img: &Image) -> Result<()> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let bytes: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
    let result = match img.channels() {
        3 => ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, bytes).map(|b| b.save(path)),
        4 => ImageBuffer::<Rgba<u8>, _>::from_raw(w, h, bytes).map(|b| b.save(path)),
        _ => return Err(invalid(path, "only RGB and RGBA images can be written")),
    };
    result
        .expect("buffer length matches the image dimensions")
        .map_err(image_error(path))
}
