//! Pupil fields, the five half-ring phase mask and PSF synthesis.
//!
//! The coded PSF is `|F{A(u,v) e^{iφ(u,v)}}|²` on a centred grid, where `A` is
//! a super-Gaussian aperture and `φ` the five half-ring phase. The constant
//! prefactor of the Fraunhofer integral is dropped since PSFs are energy
//! normalised afterwards.

use std::f64::consts::PI;

use ndarray::{s, Array2};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::bessel::{bessel_j_sequence, j1};
use crate::error::{Error, Result};
use crate::fft::{fft2_inplace, fftshift};

/// First positive root of `J1`.
pub const J1_FIRST_ZERO: f64 = 3.831_705_970_207_512_3;

/// How the phase series is turned into an angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseLaw {
    /// Argument of the complex half-ring field `Q0 + i Σ (-1)^m a J sin`.
    ///
    /// Each odd harmonic of a half-ring carries the factor `(-i)^(2m+1)`, so its
    /// sign alternates with `m`. The result covers `(-π, π]`.
    #[default]
    HalfRingField,
    /// `atan(Σ a J sin / Q0)` without sign alternation; range `(-π/2, π/2)`.
    LiteralAtan,
}

/// What the configured aperture width denotes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApertureConvention {
    /// `aperture_width` is the pupil radius; the Airy argument is `kρW_a/f`.
    #[default]
    Radius,
    /// `aperture_width` is the pupil diameter.
    Diameter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpticsConfig {
    /// Background wavelength, metres.
    pub lambda_b: f64,
    /// Laser wavelength, metres.
    pub lambda_l: f64,
    pub focal_length: f64,
    /// `W_a`, metres. See [`ApertureConvention`].
    pub aperture_width: f64,
    pub aperture_convention: ApertureConvention,
    pub pupil_pitch_u: f64,
    pub pupil_pitch_v: f64,
    pub pupil_nu: usize,
    pub pupil_nv: usize,
    /// Dimensionless ring parameters, used only through `2πξ r_n / W_a`.
    pub ring_radii: Vec<f64>,
    /// Ring orientations, radians.
    pub ring_angles: Vec<f64>,
    pub harmonic_count: usize,
    pub supergauss_order: u32,
    pub phase_law: PhaseLaw,
}

impl Default for OpticsConfig {
    fn default() -> Self {
        Self {
            lambda_b: 633e-9,
            lambda_l: 633e-9,
            focal_length: 0.11,
            aperture_width: 3.83e-3,
            aperture_convention: ApertureConvention::Radius,
            pupil_pitch_u: 3.74e-6,
            pupil_pitch_v: 3.74e-6,
            pupil_nu: 4096,
            pupil_nv: 4096,
            ring_radii: vec![13.6, 91.8, 6.3, 10.3, 4.2],
            ring_angles: vec![1.86, 1.09, 1.15, 1.21, 1.22],
            harmonic_count: 17,
            supergauss_order: 50,
            phase_law: PhaseLaw::HalfRingField,
        }
    }
}

impl OpticsConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda_b", self.lambda_b),
            ("lambda_l", self.lambda_l),
            ("focal_length", self.focal_length),
            ("aperture_width", self.aperture_width),
            ("pupil_pitch_u", self.pupil_pitch_u),
            ("pupil_pitch_v", self.pupil_pitch_v),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("optics.{name} must be positive, got {v}")));
            }
        }
        if self.pupil_nu == 0 || self.pupil_nv == 0 {
            return Err(Error::Config("optics pupil dims must be non-zero".into()));
        }
        if self.ring_radii.len() != 5 || self.ring_angles.len() != 5 {
            return Err(Error::Config(format!(
                "exactly 5 ring radii and 5 ring angles required, got {} and {}",
                self.ring_radii.len(),
                self.ring_angles.len()
            )));
        }
        if self.ring_radii.iter().chain(&self.ring_angles).any(|v| !v.is_finite()) {
            return Err(Error::Config("ring parameters must be finite".into()));
        }
        if self.supergauss_order == 0 {
            return Err(Error::Config("optics.supergauss_order must be >= 1".into()));
        }
        let wu = self.pupil_nu as f64 * self.pupil_pitch_u;
        let wv = self.pupil_nv as f64 * self.pupil_pitch_v;
        let need = 2.0 * self.aperture_width;
        if wu < need || wv < need {
            return Err(Error::Config(format!(
                "pupil grid {:.4e} x {:.4e} m is smaller than 2*W_a = {:.4e} m",
                wu, wv, need
            )));
        }
        Ok(())
    }

    pub fn aperture_diameter(&self) -> f64 {
        match self.aperture_convention {
            ApertureConvention::Radius => 2.0 * self.aperture_width,
            ApertureConvention::Diameter => self.aperture_width,
        }
    }

    pub fn aperture_radius(&self) -> f64 {
        0.5 * self.aperture_diameter()
    }

    /// Aperture transmittance at pupil position `(u, v)`.
    pub fn aperture_transmittance(&self, u: f64, v: f64) -> f64 {
        super_gauss_aperture(u, v, self.aperture_diameter(), self.supergauss_order)
    }

    /// Fraunhofer focal-plane sampling for a square transform of side `n`.
    pub fn focal_pitch(&self, wavelength: f64, n: usize) -> f64 {
        wavelength * self.focal_length / (n as f64 * self.pupil_pitch_u)
    }

    /// Same pupil extent sampled with `n` points per axis. The focal pitch is
    /// unchanged; the focal field of view shrinks by `n / N_u`.
    pub fn with_pupil_samples(&self, n: usize) -> OpticsConfig {
        OpticsConfig {
            pupil_pitch_u: self.pupil_pitch_u * self.pupil_nu as f64 / n as f64,
            pupil_pitch_v: self.pupil_pitch_v * self.pupil_nv as f64 / n as f64,
            pupil_nu: n,
            pupil_nv: n,
            ..self.clone()
        }
    }

    /// Side of the square transform grid used by [`compute_psf`].
    pub fn transform_size(&self) -> usize {
        self.pupil_nu.max(self.pupil_nv)
    }
}

/// `exp(-(4(u²+v²)/W²)^order)`: 1 at the centre, `1/e` at radius `W/2`.
pub fn super_gauss_aperture(u: f64, v: f64, width: f64, order: u32) -> f64 {
    let t = 4.0 * (u * u + v * v) / (width * width);
    (-t.powi(order as i32)).exp()
}

/// Evaluates the five half-ring phase. Holds the per-ring coefficients so grid
/// evaluation only pays for the Bessel recurrences and the angular sums.
#[derive(Debug, Clone)]
pub struct HalfRingPhase {
    radii: Vec<f64>,
    angles: Vec<f64>,
    harmonics: usize,
    law: PhaseLaw,
    /// `2π / W_a`
    arg_scale: f64,
}

/// Radial part of the series at one `ξ`: `Q0` and the signed, weighted `J_{2m+1}` terms.
#[derive(Debug, Clone)]
pub struct RadialTerms {
    q0: f64,
    /// `[ring][harmonic]`, row-major
    weighted: Vec<f64>,
    bessel: Vec<f64>,
}

impl HalfRingPhase {
    pub fn from_config(cfg: &OpticsConfig) -> Self {
        Self {
            radii: cfg.ring_radii.clone(),
            angles: cfg.ring_angles.clone(),
            harmonics: cfg.harmonic_count,
            law: cfg.phase_law,
            arg_scale: 2.0 * PI / cfg.aperture_width,
        }
    }

    pub fn new_terms(&self) -> RadialTerms {
        RadialTerms {
            q0: 0.0,
            weighted: vec![0.0; self.radii.len() * self.harmonics],
            bessel: vec![0.0; 2 * self.harmonics + 2],
        }
    }

    pub fn radial_terms(&self, xi: f64, terms: &mut RadialTerms) {
        terms.q0 = 0.0;
        for (n, &r) in self.radii.iter().enumerate() {
            bessel_j_sequence(self.arg_scale * xi * r, &mut terms.bessel);
            terms.q0 += r * terms.bessel[0];
            for m in 1..=self.harmonics {
                let mo = 2 * m + 1;
                let mut a = 4.0 * r / (mo as f64 * PI);
                if self.law == PhaseLaw::HalfRingField && m % 2 == 1 {
                    a = -a;
                }
                terms.weighted[n * self.harmonics + m - 1] = a * terms.bessel[mo];
            }
        }
    }

    /// Combines precomputed radial terms with the azimuth `phi`.
    pub fn combine(&self, terms: &RadialTerms, phi: f64) -> f64 {
        let mut series = 0.0;
        for (n, &theta) in self.angles.iter().enumerate() {
            let alpha = phi - theta;
            // sin((k+2)α) = 2cos(2α) sin(kα) − sin((k−2)α), starting from k = 1, 3.
            let two_cos = 2.0 * (2.0 * alpha).cos();
            let mut s_prev = alpha.sin();
            let mut s_cur = (3.0 * alpha).sin();
            let w = &terms.weighted[n * self.harmonics..(n + 1) * self.harmonics];
            for (m, wm) in w.iter().enumerate() {
                if m > 0 {
                    let next = two_cos * s_cur - s_prev;
                    s_prev = s_cur;
                    s_cur = next;
                }
                series += wm * s_cur;
            }
        }
        match self.law {
            PhaseLaw::LiteralAtan => {
                if terms.q0 == 0.0 {
                    0.0
                } else {
                    (series / terms.q0).atan()
                }
            }
            PhaseLaw::HalfRingField => {
                if terms.q0 == 0.0 && series == 0.0 {
                    0.0
                } else {
                    series.atan2(terms.q0)
                }
            }
        }
    }

    pub fn phase(&self, xi: f64, phi: f64) -> f64 {
        let mut terms = self.new_terms();
        self.radial_terms(xi, &mut terms);
        self.combine(&terms, phi)
    }
}

/// Five half-ring phase at polar pupil position `(xi, phi)`.
///
/// Points where `Q0(ξ) = 0` exactly return 0 under [`PhaseLaw::LiteralAtan`].
pub fn five_half_ring_phase(xi: f64, phi: f64, cfg: &OpticsConfig) -> f64 {
    HalfRingPhase::from_config(cfg).phase(xi, phi)
}

/// Pupil azimuth convention: angle of `(u, v)` measured from the `v` axis.
#[inline]
pub fn pupil_azimuth(u: f64, v: f64) -> f64 {
    u.atan2(v)
}

/// Complex pupil samples `A e^{iφ}`; rows run along `v`, columns along `u`.
#[derive(Debug, Clone)]
pub struct PupilField {
    pub values: Array2<Complex64>,
    pub pitch_u: f64,
    pub pitch_v: f64,
}

impl PupilField {
    pub fn dims(&self) -> (usize, usize) {
        self.values.dim()
    }
}

/// Samples `A(u,v) e^{iφ(u,v)}` on the centred `N_v x N_u` grid.
pub fn build_pupil_field(cfg: &OpticsConfig, use_phase: bool) -> Result<PupilField> {
    cfg.validate()?;
    let (nv, nu) = (cfg.pupil_nv, cfg.pupil_nu);
    let (cv, cu) = (nv / 2, nu / 2);
    let (du, dv) = (cfg.pupil_pitch_u, cfg.pupil_pitch_v);
    let diameter = cfg.aperture_diameter();
    let order = cfg.supergauss_order;

    // Beyond this radius exp(-t) underflows to exactly 0.
    let cutoff = 0.5 * diameter * 745.2_f64.powf(1.0 / (2.0 * order as f64));

    let mut values = Array2::<Complex64>::zeros((nv, nu));
    if !use_phase {
        let slice = values.as_slice_mut().expect("standard layout");
        slice.par_chunks_mut(nu).enumerate().for_each(|(i, row)| {
            let v = (i as f64 - cv as f64) * dv;
            for (j, out) in row.iter_mut().enumerate() {
                let u = (j as f64 - cu as f64) * du;
                *out = Complex64::new(super_gauss_aperture(u, v, diameter, order), 0.0);
            }
        });
        return Ok(PupilField {
            values,
            pitch_u: du,
            pitch_v: dv,
        });
    }

    let phase = HalfRingPhase::from_config(cfg);
    if du == dv {
        fill_phase_octants(&mut values, &phase, du, diameter, order, cutoff);
    } else {
        let slice = values.as_slice_mut().expect("standard layout");
        slice.par_chunks_mut(nu).enumerate().for_each(|(i, row)| {
            let mut terms = phase.new_terms();
            let v = (i as f64 - cv as f64) * dv;
            for (j, out) in row.iter_mut().enumerate() {
                let u = (j as f64 - cu as f64) * du;
                let a = super_gauss_aperture(u, v, diameter, order);
                if a == 0.0 {
                    continue;
                }
                phase.radial_terms(u.hypot(v), &mut terms);
                let phi = phase.combine(&terms, pupil_azimuth(u, v));
                *out = Complex64::from_polar(a, phi);
            }
        });
    }
    Ok(PupilField {
        values,
        pitch_u: du,
        pitch_v: dv,
    })
}

/// Square-pitch fast path: the Bessel terms depend only on `ξ`, so each
/// `(p, q)` offset pair with `p >= q >= 0` is evaluated once and shared by its
/// (up to) eight mirror images.
fn fill_phase_octants(
    values: &mut Array2<Complex64>,
    phase: &HalfRingPhase,
    pitch: f64,
    diameter: f64,
    order: u32,
    cutoff: f64,
) {
    let (nv, nu) = values.dim();
    let (cv, cu) = ((nv / 2) as i64, (nu / 2) as i64);
    let reach = ((cutoff / pitch).ceil() as i64 + 1).min(cu.max(cv));

    let chunks: Vec<Vec<(usize, Complex64)>> = (0..=reach)
        .into_par_iter()
        .map(|p| {
            let mut terms = phase.new_terms();
            let mut out = Vec::new();
            for q in 0..=p {
                let (uf, vf) = (p as f64 * pitch, q as f64 * pitch);
                let a = super_gauss_aperture(uf, vf, diameter, order);
                if a == 0.0 {
                    continue;
                }
                phase.radial_terms(uf.hypot(vf), &mut terms);
                let mut images = [(0i64, 0i64); 8];
                let mut count = 0;
                for (x, y) in [(p, q), (q, p)] {
                    for (sx, sy) in [(1, 1), (-1, 1), (1, -1), (-1, -1)] {
                        let cand = (sx * x, sy * y);
                        if !images[..count].contains(&cand) {
                            images[count] = cand;
                            count += 1;
                        }
                    }
                }
                for &(oj, oi) in &images[..count] {
                    let (j, i) = (cu + oj, cv + oi);
                    if j < 0 || i < 0 || j >= nu as i64 || i >= nv as i64 {
                        continue;
                    }
                    let phi = phase.combine(&terms, pupil_azimuth(oj as f64 * pitch, oi as f64 * pitch));
                    out.push((i as usize * nu + j as usize, Complex64::from_polar(a, phi)));
                }
            }
            out
        })
        .collect();

    let slice = values.as_slice_mut().expect("standard layout");
    for chunk in chunks {
        for (idx, v) in chunk {
            slice[idx] = v;
        }
    }
}

/// Nonnegative PSF samples on a square focal grid, centre at `(rows/2, cols/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Psf {
    pub values: Array2<f64>,
    /// Focal-plane sample spacing, metres.
    pub pitch: f64,
    pub wavelength: f64,
    pub energy_normalized: bool,
    /// Sum of samples before normalisation.
    pub raw_energy: f64,
}

impl Psf {
    /// Wraps raw samples, normalising to unit sum.
    pub fn from_raw(values: Array2<f64>, pitch: f64, wavelength: f64) -> Result<Self> {
        let raw_energy = values.sum();
        if !(raw_energy.is_finite() && raw_energy > 0.0) {
            return Err(Error::Numerical(format!("PSF energy {raw_energy} is not positive")));
        }
        if values.iter().any(|v| *v < 0.0) {
            return Err(Error::Input("PSF samples must be nonnegative".into()));
        }
        let values = values / raw_energy;
        Ok(Self {
            values,
            pitch,
            wavelength,
            energy_normalized: true,
            raw_energy,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn center(&self) -> (usize, usize) {
        let (r, c) = self.values.dim();
        (r / 2, c / 2)
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn energy(&self) -> f64 {
        self.values.sum()
    }

    /// Side of the smallest centred odd square holding `fraction` of the energy.
    pub fn support_width(&self, fraction: f64) -> usize {
        let (rows, cols) = self.values.dim();
        let (cr, cc) = self.center();
        let max_d = cr.max(cc).max(rows - 1 - cr).max(cols - 1 - cc);
        let mut rings = vec![0.0; max_d + 1];
        for ((r, c), v) in self.values.indexed_iter() {
            let d = r.abs_diff(cr).max(c.abs_diff(cc));
            rings[d] += v;
        }
        let target = fraction * self.values.sum();
        let mut acc = 0.0;
        for (d, e) in rings.iter().enumerate() {
            acc += e;
            if acc >= target {
                return 2 * d + 1;
            }
        }
        2 * max_d + 1
    }

    /// Crops to a centred square of odd side `side` (clipped to the grid) and renormalises.
    pub fn crop_centered(&self, side: usize) -> Result<Psf> {
        let half = side / 2;
        let (rows, cols) = self.values.dim();
        let (cr, cc) = self.center();
        let r0 = cr.saturating_sub(half);
        let c0 = cc.saturating_sub(half);
        let r1 = (cr + half + 1).min(rows);
        let c1 = (cc + half + 1).min(cols);
        let cropped = self.values.slice(s![r0..r1, c0..c1]).to_owned();
        let mut out = Psf::from_raw(cropped, self.pitch, self.wavelength)?;
        out.raw_energy = self.raw_energy;
        Ok(out)
    }

    /// Crops to the `fraction`-energy support square.
    pub fn crop_to_support(&self, fraction: f64) -> Result<Psf> {
        self.crop_centered(self.support_width(fraction))
    }
}

/// `|centred DFT(field)|²`, energy normalised, on the Fraunhofer focal grid.
///
/// Non-square pupils are zero-padded to a square transform so the focal pitch
/// stays isotropic.
pub fn compute_psf(field: &PupilField, wavelength: f64, cfg: &OpticsConfig) -> Result<Psf> {
    let (nv, nu) = field.dims();
    if nv != cfg.pupil_nv || nu != cfg.pupil_nu {
        return Err(Error::Dimension(format!(
            "pupil field is {nu}x{nv}, config expects {}x{}",
            cfg.pupil_nu, cfg.pupil_nv
        )));
    }
    if field.pitch_u != field.pitch_v {
        return Err(Error::Config(
            "PSF synthesis needs equal pupil pitch along u and v".into(),
        ));
    }
    let n = cfg.transform_size();
    let mut work = if (nv, nu) == (n, n) {
        field.values.clone()
    } else {
        let mut w = Array2::zeros((n, n));
        let (r0, c0) = ((n - nv) / 2, (n - nu) / 2);
        w.slice_mut(s![r0..r0 + nv, c0..c0 + nu]).assign(&field.values);
        w
    };
    fft2_inplace(&mut work, FftDirection::Forward);
    let intensity = work.mapv(|z| z.norm_sqr());
    drop(work);
    let centered = fftshift(&intensity);
    Psf::from_raw(centered, cfg.focal_pitch(wavelength, n), wavelength)
}

/// Builds and propagates the pupil for one wavelength.
pub fn synthesize_psf(cfg: &OpticsConfig, wavelength: f64, coded: bool) -> Result<Psf> {
    let field = build_pupil_field(cfg, coded)?;
    compute_psf(&field, wavelength, cfg)
}

/// Ideal circular-aperture PSF `|2J1(x)/x|²`, `x = kρa/f`, energy normalised.
///
/// `a` is [`OpticsConfig::aperture_radius`]; under the default convention this
/// is `W_a` itself.
pub fn airy_psf(cfg: &OpticsConfig, wavelength: f64, dims: (usize, usize), pitch: f64) -> Result<Psf> {
    if !(pitch > 0.0) {
        return Err(Error::Input(format!("sample pitch must be positive, got {pitch}")));
    }
    let (rows, cols) = dims;
    let (cr, cc) = (rows / 2, cols / 2);
    let scale = 2.0 * PI / wavelength * cfg.aperture_radius() / cfg.focal_length;
    let mut values = Array2::zeros(dims);
    values
        .as_slice_mut()
        .expect("standard layout")
        .par_chunks_mut(cols)
        .enumerate()
        .for_each(|(r, row)| {
            let y = (r as f64 - cr as f64) * pitch;
            for (c, out) in row.iter_mut().enumerate() {
                let x = (c as f64 - cc as f64) * pitch;
                *out = airy_profile(scale * x.hypot(y));
            }
        });
    Psf::from_raw(values, pitch, wavelength)
}

/// `(2 J1(x) / x)²` with the limit 1 at `x = 0`.
pub fn airy_profile(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let v = 2.0 * j1(x) / x;
        v * v
    }
}

/// Radius of the first dark ring of [`airy_psf`].
pub fn airy_first_zero_radius(cfg: &OpticsConfig, wavelength: f64) -> f64 {
    J1_FIRST_ZERO * cfg.focal_length * wavelength / (2.0 * PI * cfg.aperture_radius())
}

/// Keys cubic convolution kernel with `a = -0.5`.
pub(crate) fn keys_cubic(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

/// Bicubic resampling about the grid centre: output sample `k` sits at
/// `(k - out_center) * ratio` input samples from the input centre. Samples
/// outside the input are treated as zero.
pub fn resample_centered(values: &Array2<f64>, ratio: f64, out_dims: (usize, usize)) -> Array2<f64> {
    let (rows, cols) = values.dim();
    let (oc_r, oc_c) = (out_dims.0 / 2, out_dims.1 / 2);
    let taps = |k: usize, out_center: usize, in_center: usize, len: usize| {
        let pos = in_center as f64 + (k as f64 - out_center as f64) * ratio;
        let base = pos.floor() as i64;
        let mut w = [(0usize, 0.0f64); 4];
        let mut n = 0;
        for t in base - 1..=base + 2 {
            if t >= 0 && (t as usize) < len {
                let wt = keys_cubic(pos - t as f64);
                if wt != 0.0 {
                    w[n] = (t as usize, wt);
                    n += 1;
                }
            }
        }
        (w, n)
    };
    // Along columns first.
    let mut tmp = Array2::zeros((rows, out_dims.1));
    for c in 0..out_dims.1 {
        let (w, n) = taps(c, oc_c, cols / 2, cols);
        for r in 0..rows {
            let mut acc = 0.0;
            for &(t, wt) in &w[..n] {
                acc += wt * values[(r, t)];
            }
            tmp[(r, c)] = acc;
        }
    }
    let mut out = Array2::zeros(out_dims);
    for r in 0..out_dims.0 {
        let (w, n) = taps(r, oc_r, rows / 2, rows);
        for c in 0..out_dims.1 {
            let mut acc = 0.0;
            for &(t, wt) in &w[..n] {
                acc += wt * tmp[(t, c)];
            }
            out[(r, c)] = acc;
        }
    }
    out
}

/// Resamples a PSF to `target_pitch` (bicubic), clamps interpolation
/// undershoot to zero and renormalises to unit energy.
pub fn resample_psf(psf: &Psf, target_pitch: f64) -> Result<Psf> {
    if !(psf.pitch > 0.0 && target_pitch > 0.0) {
        return Err(Error::Input("PSF pitches must be positive".into()));
    }
    let ratio = target_pitch / psf.pitch;
    if ratio == 1.0 {
        return Ok(psf.clone());
    }
    // Odd output grid covering the symmetric extent of the input about its centre.
    let (rows, cols) = psf.dims();
    let side = |len: usize| 2 * (((len - 1) / 2) as f64 / ratio + 1e-9).floor() as usize + 1;
    let values = resample_centered(&psf.values, ratio, (side(rows), side(cols))).mapv(|v| v.max(0.0));
    let mut out = Psf::from_raw(values, target_pitch, psf.wavelength)?;
    out.raw_energy = psf.raw_energy;
    Ok(out)
}

/// Peak ratio `max(coded) / max(uncoded)` of two energy-normalised PSFs.
pub fn suppression_ratio(coded: &Psf, uncoded: &Psf) -> Result<f64> {
    if !(coded.energy_normalized && uncoded.energy_normalized) {
        return Err(Error::Input("suppression ratio needs energy-normalised PSFs".into()));
    }
    if ((coded.pitch - uncoded.pitch) / uncoded.pitch).abs() > 1e-9 {
        return Err(Error::Input(format!(
            "PSF pitches differ: {} vs {}",
            coded.pitch, uncoded.pitch
        )));
    }
    let peak0 = uncoded.peak();
    if peak0 <= 0.0 {
        return Err(Error::Numerical("uncoded PSF peak is zero".into()));
    }
    Ok(coded.peak() / peak0)
}
