//! "ADPF" raster container for PSFs and irradiance maps.
//!
//! Layout (little-endian): `b"ADPF"`, version `0x01`, dtype `0x01` (f32),
//! `u32` width, `u32` height, `f64` pitch in metres, `f64` wavelength in
//! metres, then `width * height` row-major `f32` samples.

use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::optics::Psf;

pub const MAGIC: &[u8; 4] = b"ADPF";
pub const VERSION: u8 = 1;
pub const DTYPE_F32: u8 = 1;
pub const HEADER_LEN: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct AdpfRaster {
    pub values: Array2<f64>,
    pub pitch: f64,
    pub wavelength: f64,
}

fn bad(reason: impl Into<String>) -> Error {
    Error::Format {
        format: "ADPF",
        reason: reason.into(),
    }
}

pub fn encode(values: ArrayView2<f64>, pitch: f64, wavelength: f64) -> Vec<u8> {
    let (rows, cols) = values.dim();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * rows * cols);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(DTYPE_F32);
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&pitch.to_le_bytes());
    out.extend_from_slice(&wavelength.to_le_bytes());
    for v in values.iter() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<AdpfRaster> {
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(bad("bad magic"));
    }
    if bytes[4] != VERSION {
        return Err(bad(format!("unsupported version {}", bytes[4])));
    }
    if bytes[5] != DTYPE_F32 {
        return Err(bad(format!("unsupported dtype {}", bytes[5])));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let (cols, rows) = (u32_at(6), u32_at(10));
    let (pitch, wavelength) = (f64_at(14), f64_at(22));
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| bad("dimensions overflow"))?;
    if bytes.len() != expected {
        return Err(bad(format!(
            "{cols}x{rows} raster needs {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let samples: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let values = Array2::from_shape_vec((rows, cols), samples).expect("length checked");
    Ok(AdpfRaster {
        values,
        pitch,
        wavelength,
    })
}

pub fn write(path: &Path, values: ArrayView2<f64>, pitch: f64, wavelength: f64) -> Result<()> {
    std::fs::write(path, encode(values, pitch, wavelength)).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<AdpfRaster> {
    decode(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn write_psf(path: &Path, psf: &Psf) -> Result<()> {
    write(path, psf.values.view(), psf.pitch, psf.wavelength)
}

/// Reads a PSF and renormalises it (f32 storage loses the exact unit sum).
pub fn read_psf(path: &Path) -> Result<Psf> {
    let r = read(path)?;
    Psf::from_raw(r.values, r.pitch, r.wavelength)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let v = Array2::from_shape_fn((3, 5), |(r, c)| r as f64 * 0.5 + c as f64 * 0.25);
        let bytes = encode(v.view(), 5.4e-6, 633e-9);
        assert_eq!(bytes.len(), HEADER_LEN + 60);
        assert_eq!(&bytes[6..10], &5u32.to_le_bytes());
        let r = decode(&bytes).unwrap();
        assert_eq!(r.values, v);
        assert_eq!(r.pitch, 5.4e-6);
        assert_eq!(r.wavelength, 633e-9);
    }

    #[test]
    fn rejects_bad_headers() {
        let v = Array2::<f64>::zeros((2, 2));
        let good = encode(v.view(), 1.0, 1.0);
        let mut b = good.clone();
        b[0] = b'X';
        assert!(matches!(decode(&b), Err(Error::Format { .. })));
        let mut b = good.clone();
        b[4] = 2;
        assert!(decode(&b).is_err());
        let mut b = good.clone();
        b[5] = 9;
        assert!(decode(&b).is_err());
        assert!(decode(&good[..good.len() - 1]).is_err());
        assert!(decode(&good[..10]).is_err());
    }
}
