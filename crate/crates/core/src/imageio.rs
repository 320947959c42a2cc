//! Grayscale PNG input and output (8 and 16 bit).

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};
use ndarray::Array2;

use crate::error::{Error, Result};

fn image_err(path: &Path, source: image::ImageError) -> Error {
    match source {
        image::ImageError::IoError(e) => Error::io(path, e),
        other => Error::Image {
            path: path.to_path_buf(),
            source: other,
        },
    }
}

/// Reads any supported image as luminance in `[0, 1]`. Colour images are converted to luma.
pub fn read_unit(path: &Path) -> Result<Array2<f64>> {
    let img = image::open(path).map_err(|e| image_err(path, e))?;
    Ok(unit_from_dynamic(&img))
}

pub fn unit_from_dynamic(img: &DynamicImage) -> Array2<f64> {
    match img {
        DynamicImage::ImageLuma8(buf) => to_array(buf.width(), buf.height(), buf.as_raw(), 255.0),
        _ => {
            let buf = img.to_luma16();
            to_array(buf.width(), buf.height(), buf.as_raw(), 65535.0)
        }
    }
}

fn to_array<T: Copy + Into<f64>>(w: u32, h: u32, raw: &[T], scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((h as usize, w as usize), |(r, c)| {
        raw[r * w as usize + c].into() / scale
    })
}

/// Reads a 16-bit (or 8-bit) grayscale PNG as raw counts.
pub fn read_counts(path: &Path) -> Result<Array2<u16>> {
    let img = image::open(path).map_err(|e| image_err(path, e))?;
    Ok(match img {
        DynamicImage::ImageLuma8(buf) => {
            let (w, h) = (buf.width() as usize, buf.height() as usize);
            Array2::from_shape_fn((h, w), |(r, c)| buf.as_raw()[r * w + c] as u16)
        }
        DynamicImage::ImageLuma16(buf) => {
            let (w, h) = (buf.width() as usize, buf.height() as usize);
            Array2::from_shape_fn((h, w), |(r, c)| buf.as_raw()[r * w + c])
        }
        other => {
            return Err(Error::Format {
                format: "PNG",
                reason: format!(
                    "{}: expected single-channel gray, found {:?}",
                    path.display(),
                    other.color()
                ),
            })
        }
    })
}

pub fn write_counts(path: &Path, counts: &Array2<u16>) -> Result<()> {
    let (h, w) = counts.dim();
    let raw: Vec<u16> = counts.iter().copied().collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(w as u32, h as u32, raw).expect("buffer length matches");
    buf.save(path).map_err(|e| image_err(path, e))
}

/// Writes `[0, 1]` values as 16-bit gray, rounding to the nearest code.
pub fn write_unit16(path: &Path, values: &Array2<f64>) -> Result<()> {
    write_counts(path, &values.mapv(|v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16))
}

/// Writes `[0, 1]` values as 8-bit gray.
pub fn write_unit8(path: &Path, values: &Array2<f64>) -> Result<()> {
    let (h, w) = values.dim();
    let raw: Vec<u8> = values
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(w as u32, h as u32, raw).expect("buffer length matches");
    buf.save(path).map_err(|e| image_err(path, e))
}
