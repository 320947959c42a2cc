//! Irradiance formation for a background scene and an injected laser.
//!
//! Both paths are scaled against the *uncoded* system: the scene so that its
//! unprotected peak irradiance is `α_b·I_sat(λ_b)`, the laser so that its
//! unprotected focal spot peaks at `α_l·I_sat(λ_l)`. Swapping in the coded PSF
//! then reduces those peaks by the suppression ratios.

use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::fft_convolve_full;
use crate::optics::Psf;

/// Scene radiance, normalised to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadianceMap {
    values: Array2<f64>,
}

impl RadianceMap {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Input("radiance map is empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Input(format!("radiance value {v} outside [0, 1]")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserParams {
    /// Strength in multiples of the saturation irradiance.
    pub alpha_l: f64,
    /// Direction cosines `(n_u, n_v)`; the focal spot lands at `f·n` from the axis.
    pub direction: [f64; 2],
}

impl LaserParams {
    pub fn off() -> Self {
        Self {
            alpha_l: 0.0,
            direction: [0.0, 0.0],
        }
    }
}

/// Image-plane irradiance in W·m⁻², on the full (uncropped) convolution grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IrradianceMap {
    pub values: Array2<f64>,
    pub pitch: f64,
}

impl IrradianceMap {
    pub fn dims(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// The four PSFs used by [`form_irradiance`], all energy-normalised on the sensor pitch.
#[derive(Debug, Clone)]
pub struct PsfSet {
    pub coded_b: Psf,
    pub coded_l: Psf,
    pub uncoded_b: Psf,
    pub uncoded_l: Psf,
}

impl PsfSet {
    pub fn validate(&self, pitch: f64) -> Result<()> {
        for (name, p) in [
            ("coded_b", &self.coded_b),
            ("coded_l", &self.coded_l),
            ("uncoded_b", &self.uncoded_b),
            ("uncoded_l", &self.uncoded_l),
        ] {
            if !p.energy_normalized {
                return Err(Error::Input(format!("PSF {name} is not energy-normalised")));
            }
            if ((p.pitch - pitch) / pitch).abs() > 1e-9 {
                return Err(Error::Input(format!(
                    "PSF {name} pitch {} differs from sensor pitch {pitch}",
                    p.pitch
                )));
            }
        }
        Ok(())
    }
}

/// Bilinear split of a sub-pixel impulse: `(row, col, weight)` for up to four pixels.
pub fn laser_impulse(
    laser: &LaserParams,
    focal_length: f64,
    pitch: f64,
    dims: (usize, usize),
) -> Result<Vec<(usize, usize, f64)>> {
    let (rows, cols) = dims;
    if rows == 0 || cols == 0 {
        return Err(Error::Input("laser grid is empty".into()));
    }
    let axis = |name: &str, n: f64, len: usize| -> Result<(usize, f64)> {
        let pos = (len / 2) as f64 + focal_length * n / pitch;
        let base = pos.floor();
        let frac = pos - base;
        let last = if frac > 0.0 { base + 1.0 } else { base };
        if !pos.is_finite() || base < 0.0 || last > (len - 1) as f64 {
            return Err(Error::Input(format!(
                "laser shift along {name} ({:.3} px from centre) falls outside the {len}-pixel grid",
                focal_length * n / pitch
            )));
        }
        Ok((base as usize, frac))
    };
    let (c0, fx) = axis("x (n_u)", laser.direction[0], cols)?;
    let (r0, fy) = axis("y (n_v)", laser.direction[1], rows)?;
    let mut out = Vec::with_capacity(4);
    for (dr, wy) in [(0, 1.0 - fy), (1, fy)] {
        for (dc, wx) in [(0, 1.0 - fx), (1, fx)] {
            let w = wy * wx;
            if w > 0.0 {
                out.push((r0 + dr, c0 + dc, w));
            }
        }
    }
    Ok(out)
}

/// Unit-mass impulse grid with its centre of mass at `f·n/pitch` pixels from the grid centre.
pub fn place_laser(laser: &LaserParams, focal_length: f64, pitch: f64, dims: (usize, usize)) -> Result<Array2<f64>> {
    let mut grid = Array2::zeros(dims);
    for (r, c, w) in laser_impulse(laser, focal_length, pitch, dims)? {
        grid[(r, c)] += w;
    }
    Ok(grid)
}

/// Full convolution of a sparse impulse with `psf` onto a grid of `out_dims`.
/// `origin` is the output index that an impulse at `(0, 0)` maps the PSF centre to.
fn splat_psf(
    impulses: &[(usize, usize, f64)],
    psf: ArrayView2<f64>,
    out_dims: (usize, usize),
    origin: (usize, usize),
) -> Array2<f64> {
    let mut out = Array2::zeros(out_dims);
    let (ph, pw) = psf.dim();
    let (pcr, pcc) = (ph / 2, pw / 2);
    for &(r, c, w) in impulses {
        // Output index of PSF sample (0, 0).
        let top = (r + origin.0) as i64 - pcr as i64;
        let left = (c + origin.1) as i64 - pcc as i64;
        let r0 = top.max(0);
        let c0 = left.max(0);
        let r1 = (top + ph as i64).min(out_dims.0 as i64);
        let c1 = (left + pw as i64).min(out_dims.1 as i64);
        if r0 >= r1 || c0 >= c1 {
            continue;
        }
        let src = psf.slice(s![
            (r0 - top) as usize..(r1 - top) as usize,
            (c0 - left) as usize..(c1 - left) as usize
        ]);
        out.slice_mut(s![r0 as usize..r1 as usize, c0 as usize..c1 as usize])
            .scaled_add(w, &src);
    }
    out
}

/// Background and laser irradiance on the full convolution grid
/// (`scene dims + coded_b dims - 1`).
pub fn form_irradiance(
    scene: &RadianceMap,
    laser: &LaserParams,
    psfs: &PsfSet,
    focal_length: f64,
    alpha_b: f64,
    i_sat_b: f64,
    i_sat_l: f64,
) -> Result<(IrradianceMap, IrradianceMap)> {
    if !(alpha_b >= 0.0 && laser.alpha_l >= 0.0) {
        return Err(Error::Input("alpha_b and alpha_l must be nonnegative".into()));
    }
    let pitch = psfs.coded_b.pitch;
    psfs.validate(pitch)?;

    let peak0 = if psfs.uncoded_b.values == psfs.coded_b.values {
        None
    } else {
        let reference = fft_convolve_full(scene.values().view(), psfs.uncoded_b.values.view())?;
        Some(reference.iter().copied().fold(0.0, f64::max))
    };
    let coded = fft_convolve_full(scene.values().view(), psfs.coded_b.values.view())?;
    let peak0 = peak0.unwrap_or_else(|| coded.iter().copied().fold(0.0, f64::max));
    if !(peak0 > 0.0) {
        return Err(Error::Input(
            "scene is all zero; background peak scaling is undefined".into(),
        ));
    }
    // Rounding in the FFT can leave tiny negative values.
    let scale_b = alpha_b * i_sat_b / peak0;
    let i_b = coded.mapv(|v| (v * scale_b).max(0.0));

    let out_dims = i_b.dim();
    let (kh, kw) = psfs.coded_b.dims();
    let origin = (kh / 2, kw / 2);
    let i_l = if laser.alpha_l == 0.0 {
        Array2::zeros(out_dims)
    } else {
        let impulses = laser_impulse(laser, focal_length, pitch, scene.dims())?;
        // Unprotected peak of the (sub-pixel) focal spot.
        let (uh, uw) = psfs.uncoded_l.dims();
        let local = splat_psf(
            &impulses
                .iter()
                .map(|&(r, c, w)| (r - impulses[0].0, c - impulses[0].1, w))
                .collect::<Vec<_>>(),
            psfs.uncoded_l.values.view(),
            (uh + 1, uw + 1),
            (uh / 2, uw / 2),
        );
        let peak_l = local.iter().copied().fold(0.0, f64::max);
        if !(peak_l > 0.0) {
            return Err(Error::Numerical("uncoded laser PSF has zero peak".into()));
        }
        let scale_l = laser.alpha_l * i_sat_l / peak_l;
        let scaled: Vec<_> = impulses.iter().map(|&(r, c, w)| (r, c, w * scale_l)).collect();
        splat_psf(&scaled, psfs.coded_l.values.view(), out_dims, origin)
    };
    Ok((
        IrradianceMap { values: i_b, pitch },
        IrradianceMap { values: i_l, pitch },
    ))
}
