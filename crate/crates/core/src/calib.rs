//! Read-noise calibration from dark frames, histogram comparison and
//! photon-noise coefficient fitting from gray frames.
//!
//! Counts are converted to electrons by dividing by the gain. The dither
//! offset of the quantiser (half a count) is not removed from `μ_r`.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageio;
use crate::sensor::{expose, NoiseSwitches, SensorImage, SensorModel};

/// Dark-frame exposure ladder `10^k s, k = -3..0`.
pub const EXPOSURE_LADDER: [f64; 4] = [0.001, 0.01, 0.1, 1.0];
pub const BIAS_EXPOSURE: f64 = 0.001;

/// Frames captured at one exposure time.
#[derive(Debug, Clone)]
pub struct DarkGroup {
    pub exposure: f64,
    pub frames: Vec<Array2<u16>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureStats {
    pub exposure: f64,
    pub frames: usize,
    /// Mean of the averaged dark frame, electrons.
    pub mean_electrons: f64,
    /// Spatial std of the averaged dark frame, electrons.
    pub sigma_r: f64,
    /// `sigma_r · √frames`: per-frame read noise assuming independent frames.
    pub sigma_r_single_frame: f64,
    pub histogram_divergence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    /// From the bias (shortest) exposure, electrons.
    pub mu_r: f64,
    pub exposures: Vec<ExposureStats>,
}

fn same_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * b.abs()
}

/// Averages frames pixelwise.
pub fn average_frames(frames: &[Array2<u16>]) -> Result<Array2<f64>> {
    let first = frames
        .first()
        .ok_or_else(|| Error::Input("exposure group has no frames".into()))?;
    let mut acc = Array2::<f64>::zeros(first.dim());
    for f in frames {
        if f.dim() != first.dim() {
            return Err(Error::Dimension(format!(
                "dark frames differ in size: {:?} vs {:?}",
                f.dim(),
                first.dim()
            )));
        }
        acc.zip_mut_with(f, |a, &c| *a += c as f64);
    }
    Ok(acc / frames.len() as f64)
}

fn mean_std(v: &Array2<f64>) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.sum() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn estimate_read_noise(groups: &[DarkGroup], sensor: &SensorModel) -> Result<CalibrationResult> {
    sensor.validate()?;
    if !groups.iter().any(|g| same_close(g.exposure, BIAS_EXPOSURE)) {
        return Err(Error::Input(format!(
            "no bias exposure ({BIAS_EXPOSURE} s) among the dark frames"
        )));
    }
    let dims = groups
        .iter()
        .flat_map(|g| g.frames.first())
        .map(|f| f.dim())
        .next()
        .ok_or_else(|| Error::Input("no dark frames".into()))?;
    let mut stats = Vec::with_capacity(groups.len());
    let mut mu_r = f64::NAN;
    let mut sorted: Vec<&DarkGroup> = groups.iter().collect();
    sorted.sort_by(|a, b| a.exposure.total_cmp(&b.exposure));
    for g in sorted {
        let avg = average_frames(&g.frames)?;
        if avg.dim() != dims {
            return Err(Error::Dimension(format!(
                "exposure {} frames are {:?}, expected {:?}",
                g.exposure,
                avg.dim(),
                dims
            )));
        }
        let (m, s) = mean_std(&avg);
        let (m, s) = (m / sensor.gain, s / sensor.gain);
        if same_close(g.exposure, BIAS_EXPOSURE) {
            mu_r = m;
        }
        stats.push(ExposureStats {
            exposure: g.exposure,
            frames: g.frames.len(),
            mean_electrons: m,
            sigma_r: s,
            sigma_r_single_frame: s * (g.frames.len() as f64).sqrt(),
            histogram_divergence: None,
        });
    }
    Ok(CalibrationResult { mu_r, exposures: stats })
}

/// Symmetric χ² distance `Σ (p−q)²/(p+q)` between normalised histograms over
/// shared, evenly spaced bins spanning both images. Lies in `[0, 2]`.
pub fn histogram_divergence(measured: ArrayView2<u16>, simulated: ArrayView2<u16>, bins: usize) -> Result<f64> {
    if measured.is_empty() || simulated.is_empty() {
        return Err(Error::Input("histogram comparison needs non-empty images".into()));
    }
    if bins == 0 {
        return Err(Error::Input("bins must be positive".into()));
    }
    let lo = measured.iter().chain(simulated.iter()).copied().min().unwrap() as f64;
    let hi = measured.iter().chain(simulated.iter()).copied().max().unwrap() as f64 + 1.0;
    let width = (hi - lo) / bins as f64;
    let hist = |img: &ArrayView2<u16>| {
        let mut h = vec![0.0; bins];
        for &v in img.iter() {
            let b = (((v as f64 - lo) / width) as usize).min(bins - 1);
            h[b] += 1.0;
        }
        let n = img.len() as f64;
        h.iter_mut().for_each(|x| *x /= n);
        h
    };
    let (p, q) = (hist(&measured), hist(&simulated));
    Ok(p.iter()
        .zip(&q)
        .filter(|(a, b)| *a + *b > 0.0)
        .map(|(a, b)| (a - b) * (a - b) / (a + b))
        .sum())
}

/// Simulated dark frame (no light) at one exposure.
pub fn simulate_dark_frame(sensor: &SensorModel, exposure: f64, seed: u64) -> Result<SensorImage> {
    let omega = Array2::zeros(sensor.dims());
    expose(omega.view(), sensor, exposure, seed, NoiseSwitches::ALL)
}

/// Fills `histogram_divergence` by comparing each group's first frame with a simulated one.
pub fn compare_with_simulation(
    result: &mut CalibrationResult,
    groups: &[DarkGroup],
    sensor: &SensorModel,
    bins: usize,
    seed: u64,
) -> Result<()> {
    for (i, st) in result.exposures.iter_mut().enumerate() {
        let g = groups
            .iter()
            .find(|g| same_close(g.exposure, st.exposure))
            .expect("stats built from groups");
        let measured = &g.frames[0];
        let sim_sensor = SensorModel {
            height: measured.nrows(),
            width: measured.ncols(),
            ..sensor.clone()
        };
        let sim = simulate_dark_frame(&sim_sensor, st.exposure, seed.wrapping_add(i as u64))?;
        st.histogram_divergence = Some(histogram_divergence(measured.view(), sim.counts.view(), bins)?);
    }
    Ok(())
}

/// Loads `{exposure}_{index}.png` frames from a directory, grouped by exposure.
pub fn load_dark_frames(dir: &Path) -> Result<Vec<DarkGroup>> {
    let mut groups: BTreeMap<String, (f64, Vec<(u64, Array2<u16>)>)> = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        if !path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
            continue;
        }
        let Some((exp, idx)) = stem.rsplit_once('_') else {
            return Err(Error::Input(format!(
                "{}: expected {{exposure}}_{{index}}.png",
                path.display()
            )));
        };
        let (Ok(t), Ok(i)) = (exp.parse::<f64>(), idx.parse::<u64>()) else {
            return Err(Error::Input(format!(
                "{}: expected {{exposure}}_{{index}}.png",
                path.display()
            )));
        };
        let frame = imageio::read_counts(&path)?;
        groups
            .entry(exp.to_string())
            .or_insert((t, Vec::new()))
            .1
            .push((i, frame));
    }
    let mut out: Vec<DarkGroup> = groups
        .into_values()
        .map(|(exposure, mut frames)| {
            frames.sort_by_key(|(i, _)| *i);
            DarkGroup {
                exposure,
                frames: frames.into_iter().map(|(_, f)| f).collect(),
            }
        })
        .collect();
    out.sort_by(|a, b| a.exposure.total_cmp(&b.exposure));
    Ok(out)
}

/// Per-patch statistics of a uniformly lit gray frame, in counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrayLevel {
    pub mean_counts: f64,
    pub std_counts: f64,
}

impl GrayLevel {
    pub fn from_patch(patch: ArrayView2<u16>) -> Self {
        let (m, s) = mean_std(&patch.mapv(|c| c as f64));
        Self {
            mean_counts: m,
            std_counts: s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonFit {
    pub c1: f64,
    pub c2: f64,
    /// RMS residual of the fitted photon std, photons.
    pub rms_residual: f64,
}

/// Least-squares fit of `σ_ω = c1·p + c2·√p` across gray levels.
///
/// Each level is mapped back to photons: `p = ((mean + ½)/G − μ_r − μ_c)/Q_e`
/// and `σ_ω² = ((std² − 1/6)/G² − σ_r² − μ_c)/Q_e²`, where `1/6` is the mean
/// variance added by the dithered quantiser.
pub fn fit_photon_coefficients(levels: &[GrayLevel], sensor: &SensorModel) -> Result<PhotonFit> {
    if levels.len() < 2 {
        return Err(Error::Input("photon fit needs at least two gray levels".into()));
    }
    let (g, qe) = (sensor.gain, sensor.quantum_efficiency);
    let pts: Vec<(f64, f64)> = levels
        .iter()
        .map(|l| {
            let p = ((l.mean_counts + 0.5) / g - sensor.read_noise_mean - sensor.dark_current_mean) / qe;
            let var_e = (l.std_counts * l.std_counts - 1.0 / 6.0) / (g * g)
                - sensor.read_noise_std * sensor.read_noise_std
                - sensor.dark_current_mean;
            (p.max(0.0), var_e.max(0.0).sqrt() / qe)
        })
        .collect();
    // Normal equations for columns [p, √p].
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(p, s) in &pts {
        let (x1, x2) = (p, p.sqrt());
        a11 += x1 * x1;
        a12 += x1 * x2;
        a22 += x2 * x2;
        b1 += x1 * s;
        b2 += x2 * s;
    }
    let det = a11 * a22 - a12 * a12;
    if !(det.abs() > 1e-12 * a11 * a22) {
        return Err(Error::Numerical(
            "gray levels do not separate the two noise terms".into(),
        ));
    }
    let c1 = (b1 * a22 - b2 * a12) / det;
    let c2 = (a11 * b2 - a12 * b1) / det;
    let rms = (pts
        .iter()
        .map(|&(p, s)| (c1 * p + c2 * p.sqrt() - s).powi(2))
        .sum::<f64>()
        / pts.len() as f64)
        .sqrt();
    Ok(PhotonFit {
        c1,
        c2,
        rms_residual: rms,
    })
}
