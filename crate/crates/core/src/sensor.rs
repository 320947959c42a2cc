//! Photon statistics, electron conversion, noise and digitisation.
//!
//! Pipeline per pixel:
//! `ω → e = Q_e·ω + n_c + n_r → clamp to [0, e_sat] → ·G + n_q → floor → clip to [0, s_sat]`.
//! The crop to sensor resolution happens first; every step after it is pixelwise,
//! so cropping commutes with the noise model.

use ndarray::{s, Array2, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, NoiseSource};

/// Planck constant as used throughout the model, J·s.
pub const PLANCK: f64 = 6.63e-34;
/// Speed of light, m/s.
pub const LIGHT_SPEED: f64 = 3e8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorModel {
    pub quantum_efficiency: f64,
    /// Digital counts per electron.
    pub gain: f64,
    /// Full-well capacity, electrons.
    pub full_well: f64,
    pub read_noise_mean: f64,
    pub read_noise_std: f64,
    pub dark_current_mean: f64,
    pub bit_depth: u32,
    pub pixel_pitch: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            quantum_efficiency: 0.56,
            gain: 0.37,
            full_well: 25500.0,
            read_noise_mean: 390.0,
            read_noise_std: 10.5,
            dark_current_mean: 0.002,
            bit_depth: 16,
            pixel_pitch: 5.4e-6,
            width: 2532,
            height: 2532,
        }
    }
}

impl SensorModel {
    /// The 3352×2532 full-frame layout of the same camera.
    pub fn full_frame() -> Self {
        Self {
            width: 3352,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.quantum_efficiency > 0.0 && self.quantum_efficiency <= 1.0) {
            return Err(Error::Config(format!(
                "sensor.quantum_efficiency must be in (0, 1], got {}",
                self.quantum_efficiency
            )));
        }
        for (name, v) in [
            ("gain", self.gain),
            ("full_well", self.full_well),
            ("pixel_pitch", self.pixel_pitch),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("sensor.{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("read_noise_mean", self.read_noise_mean),
            ("read_noise_std", self.read_noise_std),
            ("dark_current_mean", self.dark_current_mean),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("sensor.{name} must be nonnegative, got {v}")));
            }
        }
        if !(8..=16).contains(&self.bit_depth) {
            return Err(Error::Config(format!(
                "sensor.bit_depth must be in 8..=16, got {}",
                self.bit_depth
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("sensor resolution must be non-zero".into()));
        }
        Ok(())
    }

    /// Largest digital count, `2^bpc - 1`.
    pub fn s_sat(&self) -> u32 {
        (1u32 << self.bit_depth) - 1
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }
}

/// How the photon-noise coefficients enter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhotonLaw {
    /// `ω = max(0, p + N(0, c1·p + c2·√p))`.
    #[default]
    ScaledStd,
    /// `ω = max(0, N(c1·p, c2·√p))`.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhotonModel {
    pub c1: f64,
    pub c2: f64,
    pub law: PhotonLaw,
}

impl Default for PhotonModel {
    fn default() -> Self {
        Self {
            c1: 0.2,
            c2: 1.0,
            law: PhotonLaw::ScaledStd,
        }
    }
}

impl PhotonModel {
    pub fn noiseless() -> Self {
        Self {
            c1: 0.0,
            c2: 0.0,
            law: PhotonLaw::ScaledStd,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c1.is_finite() && self.c1 >= 0.0 && self.c2.is_finite() && self.c2 >= 0.0) {
            return Err(Error::Config(format!(
                "photon coefficients must be nonnegative, got c1={} c2={}",
                self.c1, self.c2
            )));
        }
        Ok(())
    }

    /// Whether the coefficients lie in the training ranges `c1 ∈ [0, 0.25]`, `c2 ∈ [0.9, 1.1]`.
    pub fn within_training_ranges(&self) -> bool {
        (0.0..=0.25).contains(&self.c1) && (0.9..=1.1).contains(&self.c2)
    }
}

/// Per-source enable flags, for testing individual noise terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseSwitches {
    pub dark_current: bool,
    pub read_noise: bool,
    pub quantization: bool,
}

impl NoiseSwitches {
    pub const ALL: Self = Self {
        dark_current: true,
        read_noise: true,
        quantization: true,
    };
    pub const NONE: Self = Self {
        dark_current: false,
        read_noise: false,
        quantization: false,
    };
}

impl Default for NoiseSwitches {
    fn default() -> Self {
        Self::ALL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorImage {
    pub counts: Array2<u16>,
    pub bit_depth: u32,
    /// Exposure time, seconds.
    pub exposure: f64,
}

impl SensorImage {
    pub fn dims(&self) -> (usize, usize) {
        self.counts.dim()
    }

    /// Counts divided by `s_sat`, in `[0, 1]`.
    pub fn normalized(&self) -> Array2<f64> {
        let s = ((1u32 << self.bit_depth) - 1) as f64;
        self.counts.mapv(|c| c as f64 / s)
    }
}

/// Irradiance that fills the well in one exposure: `e_sat·hc/(λ·t·Δx²·Q_e)`.
pub fn saturation_irradiance(sensor: &SensorModel, wavelength: f64, exposure: f64) -> f64 {
    sensor.full_well * PLANCK * LIGHT_SPEED
        / (wavelength * exposure * sensor.pixel_pitch.powi(2) * sensor.quantum_efficiency)
}

/// Expected photons per pixel, `(I_b·λ_b + I_l·λ_l)·t·Δx²/(hc)`.
pub fn photon_rate(
    i_b: ArrayView2<f64>,
    i_l: ArrayView2<f64>,
    lambda_b: f64,
    lambda_l: f64,
    exposure: f64,
    pixel_pitch: f64,
) -> Result<Array2<f64>> {
    if i_b.dim() != i_l.dim() {
        return Err(Error::Dimension(format!(
            "background irradiance {:?} vs laser irradiance {:?}",
            i_b.dim(),
            i_l.dim()
        )));
    }
    let k = exposure * pixel_pitch * pixel_pitch / (PLANCK * LIGHT_SPEED);
    let mut p = Array2::zeros(i_b.dim());
    ndarray::Zip::from(&mut p)
        .and(&i_b)
        .and(&i_l)
        .for_each(|p, &b, &l| *p = ((b * lambda_b + l * lambda_l) * k).max(0.0));
    Ok(p)
}

fn for_each_row<F>(out: &mut Array2<f64>, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let cols = out.ncols();
    if cols == 0 {
        return;
    }
    out.as_slice_mut()
        .expect("standard layout")
        .par_chunks_mut(cols)
        .enumerate()
        .for_each(|(r, row)| f(r, row));
}

/// Photon-noise draw. Row `r` uses stream `r` of the photon generator for `seed`.
pub fn sample_photons(p: ArrayView2<f64>, model: &PhotonModel, seed: u64) -> Result<Array2<f64>> {
    model.validate()?;
    if p.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Input("photon rates must be nonnegative".into()));
    }
    let mut out = p.as_standard_layout().to_owned();
    if model.c1 == 0.0 && model.c2 == 0.0 && model.law == PhotonLaw::ScaledStd {
        return Ok(out);
    }
    let m = *model;
    for_each_row(&mut out, |r, row| {
        let mut rng = stream_rng(seed, NoiseSource::Photon, r as u64);
        for v in row.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            let p = *v;
            *v = match m.law {
                PhotonLaw::ScaledStd => p + (m.c1 * p + m.c2 * p.sqrt()) * z,
                PhotonLaw::Literal => m.c1 * p + m.c2 * p.sqrt() * z,
            }
            .max(0.0);
        }
    });
    Ok(out)
}

/// Central `(height, width)` window of `grid`.
pub fn center_crop<T: Clone>(grid: ArrayView2<T>, dims: (usize, usize)) -> Result<Array2<T>> {
    let (rows, cols) = grid.dim();
    if rows < dims.0 || cols < dims.1 {
        return Err(Error::Dimension(format!(
            "input {rows}x{cols} is smaller than the {}x{} sensor",
            dims.0, dims.1
        )));
    }
    let (r0, c0) = ((rows - dims.0) / 2, (cols - dims.1) / 2);
    Ok(grid.slice(s![r0..r0 + dims.0, c0..c0 + dims.1]).to_owned())
}

/// Collected electrons after dark current and read noise, clamped to `[0, e_sat]`.
pub fn electrons(
    omega: ArrayView2<f64>,
    sensor: &SensorModel,
    seed: u64,
    switches: NoiseSwitches,
) -> Result<Array2<f64>> {
    sensor.validate()?;
    let mut e = omega.mapv(|w| sensor.quantum_efficiency * w);
    let dark = if switches.dark_current && sensor.dark_current_mean > 0.0 {
        Some(Poisson::new(sensor.dark_current_mean).map_err(|e| Error::Config(e.to_string()))?)
    } else {
        None
    };
    let read = switches.read_noise;
    let (mu_r, sigma_r, full) = (sensor.read_noise_mean, sensor.read_noise_std, sensor.full_well);
    for_each_row(&mut e, |r, row| {
        if let Some(d) = &dark {
            let mut rng = stream_rng(seed, NoiseSource::DarkCurrent, r as u64);
            for v in row.iter_mut() {
                *v += d.sample(&mut rng);
            }
        }
        if read {
            let mut rng = stream_rng(seed, NoiseSource::ReadNoise, r as u64);
            for v in row.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *v += mu_r + sigma_r * z;
            }
        }
        for v in row.iter_mut() {
            *v = v.clamp(0.0, full);
        }
    });
    Ok(e)
}

/// Gain, dither `U(-0.5, 0.5)`, floor and clip to `[0, s_sat]`.
pub fn digitize(electrons: ArrayView2<f64>, sensor: &SensorModel, seed: u64, switches: NoiseSwitches) -> Array2<u16> {
    let s_sat = sensor.s_sat() as f64;
    let mut counts = electrons.mapv(|e| e * sensor.gain);
    let quant = switches.quantization;
    for_each_row(&mut counts, |r, row| {
        let mut rng = stream_rng(seed, NoiseSource::Quantization, r as u64);
        for v in row.iter_mut() {
            let n_q = if quant { rng.gen::<f64>() - 0.5 } else { 0.0 };
            *v = (*v + n_q).floor().clamp(0.0, s_sat);
        }
    });
    counts.mapv(|v| v as u16)
}

/// Full sensor response for a photon grid at least as large as the sensor.
pub fn expose(
    omega: ArrayView2<f64>,
    sensor: &SensorModel,
    exposure: f64,
    seed: u64,
    switches: NoiseSwitches,
) -> Result<SensorImage> {
    sensor.validate()?;
    if omega.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Input("photon counts must be nonnegative".into()));
    }
    let cropped = center_crop(omega, sensor.dims())?;
    let e = electrons(cropped.view(), sensor, seed, switches)?;
    Ok(SensorImage {
        counts: digitize(e.view(), sensor, seed, switches),
        bit_depth: sensor.bit_depth,
        exposure,
    })
}
