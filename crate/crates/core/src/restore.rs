//! Wiener deconvolution in the intensity domain and regulariser fitting.
//!
//! `B = F·H̄ / (|H|² + γ / max(P, floor))`, with `P` the mean image power
//! `mean(|F|²)/N` (equal to `mean(img²)` by Parseval). Scaling the image by `a`
//! scales `P` by `a²`, so the filter is scale-invariant only when `γ` scales too.

use ndarray::{s, Array2, ArrayView2};
use num_complex::Complex64;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::fft2_inplace;
use crate::metrics::mse;
use crate::optics::Psf;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WienerConfig {
    pub gamma: f64,
    pub epsilon_floor: f64,
}

impl Default for WienerConfig {
    fn default() -> Self {
        Self {
            gamma: 1e-3,
            epsilon_floor: 1e-12,
        }
    }
}

impl WienerConfig {
    pub fn with_gamma(gamma: f64) -> Self {
        Self {
            gamma,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WienerDiagnostics {
    /// Mean image power used in the regulariser.
    pub power: f64,
    /// `γ / max(P, floor)`.
    pub regularizer: f64,
    pub min_abs_h: f64,
    pub max_abs_h: f64,
    /// Ratio of the largest to smallest filter denominator.
    pub condition: f64,
    /// Largest imaginary residue relative to the output norm.
    pub imag_residue: f64,
}

/// Places the PSF centre at index `(0, 0)` of a zero grid of `dims`, wrapping.
fn psf_to_otf_grid(psf: ArrayView2<f64>, dims: (usize, usize)) -> Array2<Complex64> {
    let (ph, pw) = psf.dim();
    let (cr, cc) = (ph / 2, pw / 2);
    let mut g = Array2::zeros(dims);
    for ((r, c), v) in psf.indexed_iter() {
        let rr = (r as i64 - cr as i64).rem_euclid(dims.0 as i64) as usize;
        let cc2 = (c as i64 - cc as i64).rem_euclid(dims.1 as i64) as usize;
        g[(rr, cc2)] += Complex64::new(*v, 0.0);
    }
    g
}

pub fn wiener_deconvolve(
    img: ArrayView2<f64>,
    psf: &Psf,
    cfg: &WienerConfig,
) -> Result<(Array2<f64>, WienerDiagnostics)> {
    if !(cfg.gamma >= 0.0) || !(cfg.epsilon_floor > 0.0) {
        return Err(Error::Config(format!(
            "gamma must be >= 0 and the floor positive, got {} and {}",
            cfg.gamma, cfg.epsilon_floor
        )));
    }
    if !psf.energy_normalized {
        return Err(Error::Input("Wiener filter needs an energy-normalised PSF".into()));
    }
    let dims = img.dim();
    if dims.0 == 0 || dims.1 == 0 {
        return Err(Error::Input("image is empty".into()));
    }
    if psf.dims().0 > dims.0 || psf.dims().1 > dims.1 {
        return Err(Error::Dimension(format!(
            "PSF {:?} is larger than the image {:?}",
            psf.dims(),
            dims
        )));
    }
    let n = (dims.0 * dims.1) as f64;
    let mut f = img.mapv(|v| Complex64::new(v, 0.0));
    fft2_inplace(&mut f, FftDirection::Forward);
    let mut h = psf_to_otf_grid(psf.values.view(), dims);
    fft2_inplace(&mut h, FftDirection::Forward);

    let power = f.iter().map(|z| z.norm_sqr()).sum::<f64>() / n / n;
    let regularizer = cfg.gamma / power.max(cfg.epsilon_floor);
    let (mut min_h, mut max_h) = (f64::INFINITY, 0.0f64);
    let (mut min_d, mut max_d) = (f64::INFINITY, 0.0f64);
    ndarray::Zip::from(&mut f).and(&h).for_each(|fv, hv| {
        let h2 = hv.norm_sqr();
        let a = h2.sqrt();
        min_h = min_h.min(a);
        max_h = max_h.max(a);
        let denom = (h2 + regularizer).max(cfg.epsilon_floor * cfg.epsilon_floor);
        min_d = min_d.min(denom);
        max_d = max_d.max(denom);
        *fv = *fv * hv.conj() / denom;
    });
    fft2_inplace(&mut f, FftDirection::Inverse);
    let out = f.mapv(|z| z.re / n);
    let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    let imag = f.iter().map(|z| (z.im / n).abs()).fold(0.0, f64::max);
    Ok((
        out,
        WienerDiagnostics {
            power,
            regularizer,
            min_abs_h: min_h,
            max_abs_h: max_h,
            condition: max_d / min_d,
            imag_residue: if norm > 0.0 { imag / norm } else { imag },
        },
    ))
}

/// A degraded image, its ground truth and the PSF that blurred it. The
/// restored image is centre-cropped to the truth's dims before scoring.
#[derive(Debug, Clone)]
pub struct TrainingPair {
    pub degraded: Array2<f64>,
    pub truth: Array2<f64>,
    pub psf: Psf,
}

fn center_view(img: &Array2<f64>, dims: (usize, usize)) -> Result<ArrayView2<'_, f64>> {
    let (h, w) = img.dim();
    if h < dims.0 || w < dims.1 {
        return Err(Error::Dimension(format!(
            "restored {:?} smaller than truth {:?}",
            img.dim(),
            dims
        )));
    }
    let (r0, c0) = ((h - dims.0) / 2, (w - dims.1) / 2);
    Ok(img.slice(s![r0..r0 + dims.0, c0..c0 + dims.1]))
}

/// Mean MSE over `pairs` for one `γ`.
pub fn restoration_loss(pairs: &[TrainingPair], gamma: f64) -> Result<f64> {
    let cfg = WienerConfig::with_gamma(gamma);
    let mut total = 0.0;
    for p in pairs {
        let (restored, _) = wiener_deconvolve(p.degraded.view(), &p.psf, &cfg)?;
        total += mse(center_view(&restored, p.truth.dim())?, p.truth.view())?;
    }
    Ok(total / pairs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaFit {
    pub gamma: f64,
    pub loss: f64,
    pub evaluations: usize,
    pub search: [f64; 2],
}

/// Golden-section search on `log10 γ` over `[lo, hi]` to a bracket of 1e-3
/// decades. The bracket ends are scored too, so a monotone loss returns the
/// better end exactly.
pub fn fit_gamma(pairs: &[TrainingPair], lo: f64, hi: f64) -> Result<GammaFit> {
    if pairs.is_empty() {
        return Err(Error::Input("fit_gamma needs at least one pair".into()));
    }
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Config(format!(
            "gamma search needs 0 < lo < hi, got [{lo}, {hi}]"
        )));
    }
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let mut evaluations = 0;
    let mut loss = |x: f64| -> Result<f64> {
        evaluations += 1;
        restoration_loss(pairs, 10f64.powf(x))
    };
    let (mut a, mut b) = (lo.log10(), hi.log10());
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let (mut fc, mut fd) = (loss(c)?, loss(d)?);
    while b - a > 1e-3 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = loss(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = loss(d)?;
        }
    }
    let mid = 0.5 * (a + b);
    let mut best = (mid, loss(mid)?);
    for x in [lo.log10(), hi.log10()] {
        let fx = loss(x)?;
        if fx < best.1 {
            best = (x, fx);
        }
    }
    let gamma = if best.0 == lo.log10() {
        lo
    } else if best.0 == hi.log10() {
        hi
    } else {
        10f64.powf(best.0)
    };
    Ok(GammaFit {
        gamma,
        loss: best.1,
        evaluations,
        search: [lo, hi],
    })
}
