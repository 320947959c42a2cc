//! Dataset sampling and sample synthesis.
//!
//! Each sample is a pure function of `(DatasetConfig, scene store, index,
//! master seed)`: the per-sample seed is derived from the master seed and the
//! index, and every random draw downstream is keyed by it.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{s, Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adpf;
use crate::error::{Error, Result};
use crate::forward::{form_irradiance, IrradianceMap, LaserParams, PsfSet, RadianceMap};
use crate::imageio;
use crate::optics::{keys_cubic, resample_psf, suppression_ratio, synthesize_psf, OpticsConfig, Psf};
use crate::rng::{derive_seed, stream_rng, NoiseSource};
use crate::sensor::{
    expose, photon_rate, sample_photons, saturation_irradiance, NoiseSwitches, PhotonLaw, PhotonModel, SensorImage,
    SensorModel,
};

/// Robustness-evaluation degradation levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DegradationPreset {
    E1,
    E2,
    M,
    H1,
    H2,
}

/// Parameters held fixed by every preset.
pub const PRESET_C2: f64 = 1.0;
pub const PRESET_READ_MEAN: f64 = 390.0;
pub const PRESET_READ_STD: f64 = 10.5;
pub const PRESET_DARK_MEAN: f64 = 0.002;
pub const PRESET_EXPOSURE: f64 = 0.1;

impl DegradationPreset {
    pub const ALL: [DegradationPreset; 5] = [Self::E1, Self::E2, Self::M, Self::H1, Self::H2];

    /// `(α_l, α_b, c1)`.
    pub fn values(self) -> (f64, f64, f64) {
        match self {
            Self::E1 => (0.0, 0.8, 0.01),
            Self::E2 => (3e4, 0.6, 0.03),
            Self::M => (3e5, 0.4, 0.05),
            Self::H1 => (1e6, 0.3, 0.10),
            Self::H2 => (1.5e6, 0.2, 0.20),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::E1 => "E1",
            Self::E2 => "E2",
            Self::M => "M",
            Self::H1 => "H1",
            Self::H2 => "H2",
        }
    }
}

impl std::str::FromStr for DegradationPreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown preset {s:?}; expected one of E1, E2, M, H1, H2")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub alpha_l_range: [f64; 2],
    /// Number of evenly spaced laser strengths to draw from.
    pub alpha_l_table_size: usize,
    pub alpha_b_range: [f64; 2],
    pub c1_range: [f64; 2],
    pub c2_range: [f64; 2],
    pub read_mean_range: [f64; 2],
    pub read_std_range: [f64; 2],
    /// Dark current is drawn as `N(mean, mean/2)`, clamped at zero.
    pub dark_mean: f64,
    pub exposure_mean: f64,
    pub exposure_rel_std: f64,
    /// 3σ of the laser focal-spot shift as a fraction of the sensor half-extent.
    pub laser_spread: f64,
    pub photon_law: PhotonLaw,
    /// Side of the downsampled working images.
    pub working_size: usize,
    /// Minimum side of the zero-padded restoration input.
    pub padded_size: usize,
    /// Energy fraction defining the PSF support.
    pub psf_energy_fraction: f64,
    pub preset: Option<DegradationPreset>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            alpha_l_range: [0.0, 2e6],
            alpha_l_table_size: 10_000,
            alpha_b_range: [0.3, 0.7],
            c1_range: [0.0, 0.25],
            c2_range: [0.9, 1.1],
            read_mean_range: [350.0, 400.0],
            read_std_range: [10.0, 11.0],
            dark_mean: 0.002,
            exposure_mean: 0.1,
            exposure_rel_std: 0.1,
            laser_spread: 0.36,
            photon_law: PhotonLaw::ScaledStd,
            working_size: 256,
            padded_size: 384,
            psf_energy_fraction: 0.999,
            preset: None,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in [
            ("alpha_l_range", self.alpha_l_range),
            ("alpha_b_range", self.alpha_b_range),
            ("c1_range", self.c1_range),
            ("c2_range", self.c2_range),
            ("read_mean_range", self.read_mean_range),
            ("read_std_range", self.read_std_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
                return Err(Error::Config(format!(
                    "dataset.{name} must satisfy 0 <= lo <= hi, got [{lo}, {hi}]"
                )));
            }
        }
        if self.alpha_l_table_size < 2 {
            return Err(Error::Config("dataset.alpha_l_table_size must be >= 2".into()));
        }
        if !(self.exposure_mean > 0.0) || self.exposure_rel_std < 0.0 || self.dark_mean < 0.0 {
            return Err(Error::Config(
                "dataset exposure/dark-current parameters out of range".into(),
            ));
        }
        if !(self.laser_spread >= 0.0) {
            return Err(Error::Config("dataset.laser_spread must be nonnegative".into()));
        }
        if self.working_size == 0 || self.padded_size < self.working_size {
            return Err(Error::Config("dataset.padded_size must be >= working_size > 0".into()));
        }
        if !(self.psf_energy_fraction > 0.0 && self.psf_energy_fraction <= 1.0) {
            return Err(Error::Config("dataset.psf_energy_fraction must be in (0, 1]".into()));
        }
        Ok(())
    }

    /// The `i`-th of the evenly spaced laser strengths.
    pub fn alpha_l_value(&self, i: usize) -> f64 {
        let [lo, hi] = self.alpha_l_range;
        lo + (hi - lo) * i as f64 / (self.alpha_l_table_size - 1) as f64
    }
}

/// One fully resolved draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub index: u64,
    pub scene_id: String,
    /// `[row, col, height, width]` in scene pixels.
    pub crop_rect: [usize; 4],
    pub alpha_b: f64,
    pub alpha_l: f64,
    /// `(n_u, n_v)`.
    pub laser_direction: [f64; 2],
    pub exposure: f64,
    pub c1: f64,
    pub c2: f64,
    pub read_mean: f64,
    pub read_std: f64,
    pub dark_mean: f64,
    pub seed: u64,
    pub preset: Option<DegradationPreset>,
}

impl SampleSpec {
    pub fn photon_model(&self, law: PhotonLaw) -> PhotonModel {
        PhotonModel {
            c1: self.c1,
            c2: self.c2,
            law,
        }
    }

    /// Sensor with this draw's noise statistics.
    pub fn sensor(&self, base: &SensorModel) -> SensorModel {
        SensorModel {
            read_noise_mean: self.read_mean,
            read_noise_std: self.read_std,
            dark_current_mean: self.dark_mean,
            ..base.clone()
        }
    }

    pub fn laser(&self) -> LaserParams {
        LaserParams {
            alpha_l: self.alpha_l,
            direction: self.laser_direction,
        }
    }

    /// Overrides the preset-controlled parameters and fixes the rest to the preset constants.
    pub fn apply_preset(&mut self, preset: DegradationPreset) {
        let (alpha_l, alpha_b, c1) = preset.values();
        self.alpha_l = alpha_l;
        self.alpha_b = alpha_b;
        self.c1 = c1;
        self.c2 = PRESET_C2;
        self.read_mean = PRESET_READ_MEAN;
        self.read_std = PRESET_READ_STD;
        self.dark_mean = PRESET_DARK_MEAN;
        self.exposure = PRESET_EXPOSURE;
        self.preset = Some(preset);
    }
}

/// Source of grayscale scenes.
#[derive(Debug, Clone)]
pub enum SceneStore {
    /// PNG files in a directory, sorted by name.
    Directory {
        root: PathBuf,
        entries: Vec<(String, (usize, usize))>,
    },
    /// Seeded synthetic scenes `procedural:<i>`.
    Procedural { count: usize, dims: (usize, usize) },
}

impl SceneStore {
    pub fn from_dir(root: &Path) -> Result<Self> {
        let mut names = Vec::new();
        for entry in fs::read_dir(root).map_err(|e| Error::io(root, e))? {
            let entry = entry.map_err(|e| Error::io(root, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.to_ascii_lowercase().ends_with(".png") {
                names.push(name);
            }
        }
        names.sort();
        if names.is_empty() {
            return Err(Error::Input(format!("no PNG scenes in {}", root.display())));
        }
        let mut entries = Vec::with_capacity(names.len());
        for name in names {
            let path = root.join(&name);
            let (w, h) = image::image_dimensions(&path).map_err(|e| Error::Image {
                path: path.clone(),
                source: e,
            })?;
            entries.push((name, (h as usize, w as usize)));
        }
        Ok(Self::Directory {
            root: root.to_path_buf(),
            entries,
        })
    }

    pub fn procedural(count: usize, dims: (usize, usize)) -> Self {
        Self::Procedural { count, dims }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Directory { entries, .. } => entries.len(),
            Self::Procedural { count, .. } => *count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn id(&self, i: usize) -> String {
        match self {
            Self::Directory { entries, .. } => entries[i].0.clone(),
            Self::Procedural { .. } => format!("procedural:{i}"),
        }
    }

    pub fn dims(&self, i: usize) -> (usize, usize) {
        match self {
            Self::Directory { entries, .. } => entries[i].1,
            Self::Procedural { dims, .. } => *dims,
        }
    }

    pub fn load(&self, id: &str) -> Result<Array2<f64>> {
        match self {
            Self::Directory { root, entries } => {
                if !entries.iter().any(|(n, _)| n == id) {
                    return Err(Error::Input(format!("scene {id:?} not found in {}", root.display())));
                }
                imageio::read_unit(&root.join(id))
            }
            Self::Procedural { count, dims } => {
                let i: usize = id
                    .strip_prefix("procedural:")
                    .and_then(|s| s.parse().ok())
                    .filter(|i| i < count)
                    .ok_or_else(|| Error::Input(format!("scene {id:?} not in procedural store")))?;
                Ok(procedural_scene(derive_seed(0, "scene", i as u64), *dims))
            }
        }
    }
}

/// Synthetic grayscale scene: a smooth gradient with soft-edged rectangles and discs.
pub fn procedural_scene(seed: u64, dims: (usize, usize)) -> Array2<f64> {
    let (h, w) = dims;
    let mut rng = stream_rng(seed, NoiseSource::Custom(1), 0);
    let (g0, gx, gy): (f64, f64, f64) = (
        rng.gen_range(0.2..0.5),
        rng.gen_range(-0.2..0.2),
        rng.gen_range(-0.2..0.2),
    );
    let mut img = Array2::from_shape_fn(dims, |(r, c)| {
        g0 + gx * c as f64 / w.max(1) as f64 + gy * r as f64 / h.max(1) as f64
    });
    let scale = h.min(w) as f64;
    let edge = (scale / 200.0).max(0.5);
    let shapes = 12 + (rng.gen::<u32>() % 12) as usize;
    for _ in 0..shapes {
        let level: f64 = rng.gen_range(0.0..1.0);
        let cy = rng.gen_range(0.0..h as f64);
        let cx = rng.gen_range(0.0..w as f64);
        let ry = rng.gen_range(0.03..0.25) * scale;
        let rx = rng.gen_range(0.03..0.25) * scale;
        let disc = rng.gen_bool(0.5);
        let (r0, r1) = (
            ((cy - ry - 4.0 * edge).max(0.0)) as usize,
            ((cy + ry + 4.0 * edge) as usize).min(h),
        );
        let (c0, c1) = (
            ((cx - rx - 4.0 * edge).max(0.0)) as usize,
            ((cx + rx + 4.0 * edge) as usize).min(w),
        );
        for r in r0..r1 {
            for c in c0..c1 {
                let (dy, dx) = (r as f64 + 0.5 - cy, c as f64 + 0.5 - cx);
                // Signed distance (pixels) outside the shape boundary.
                let d = if disc {
                    ((dy / ry).hypot(dx / rx) - 1.0) * ry.min(rx)
                } else {
                    (dy.abs() - ry).max(dx.abs() - rx)
                };
                let a = 1.0 / (1.0 + (d / edge).exp());
                let v = &mut img[(r, c)];
                *v = *v * (1.0 - a) + level * a;
            }
        }
    }
    img.mapv(|v| v.clamp(0.0, 1.0))
}

/// Draws the parameters of sample `index`.
pub fn sample_spec(
    cfg: &DatasetConfig,
    scenes: &SceneStore,
    sensor: &SensorModel,
    focal_length: f64,
    index: u64,
    master_seed: u64,
) -> Result<SampleSpec> {
    cfg.validate()?;
    if scenes.is_empty() {
        return Err(Error::Input("scene store is empty".into()));
    }
    let seed = derive_seed(master_seed, "sample", index);
    let mut rng = stream_rng(seed, NoiseSource::Sampling, 0);
    let uniform = |rng: &mut rand_chacha::ChaCha8Rng, [lo, hi]: [f64; 2]| lo + (hi - lo) * rng.gen::<f64>();

    let scene = rng.gen_range(0..scenes.len());
    let (sh, sw) = scenes.dims(scene);
    let (h, w) = sensor.dims();
    if sh < h || sw < w {
        return Err(Error::Input(format!(
            "scene {} is {sw}x{sh}, smaller than the {w}x{h} sensor",
            scenes.id(scene)
        )));
    }
    let row = rng.gen_range(0..=sh - h);
    let col = rng.gen_range(0..=sw - w);

    let alpha_l = cfg.alpha_l_value(rng.gen_range(0..cfg.alpha_l_table_size));
    let extent = [w as f64 * sensor.pixel_pitch, h as f64 * sensor.pixel_pitch];
    let mut direction = [0.0; 2];
    for (d, e) in direction.iter_mut().zip(extent) {
        let sigma = cfg.laser_spread * 0.5 * e / 3.0 / focal_length;
        let z: f64 = rng.sample(StandardNormal);
        // Keep the spot on the sensor; the bound sits far beyond 3σ.
        let bound = 0.45 * e / focal_length;
        *d = (sigma * z).clamp(-bound, bound);
    }
    let alpha_b = uniform(&mut rng, cfg.alpha_b_range);
    let c1 = uniform(&mut rng, cfg.c1_range);
    let c2 = uniform(&mut rng, cfg.c2_range);
    let read_mean = uniform(&mut rng, cfg.read_mean_range);
    let read_std = uniform(&mut rng, cfg.read_std_range);
    let z: f64 = rng.sample(StandardNormal);
    let dark_mean = (cfg.dark_mean + 0.5 * cfg.dark_mean * z).max(0.0);
    let z: f64 = rng.sample(StandardNormal);
    let exposure = (cfg.exposure_mean * (1.0 + cfg.exposure_rel_std * z)).max(1e-3 * cfg.exposure_mean);

    let mut spec = SampleSpec {
        index,
        scene_id: scenes.id(scene),
        crop_rect: [row, col, h, w],
        alpha_b,
        alpha_l,
        laser_direction: direction,
        exposure,
        c1,
        c2,
        read_mean,
        read_std,
        dark_mean,
        seed,
        preset: None,
    };
    if let Some(p) = cfg.preset {
        spec.apply_preset(p);
    }
    Ok(spec)
}

/// Separable resampling weights: for each output sample, the first input
/// index and its tap weights.
fn axis_weights(src: usize, dst: usize) -> Vec<(usize, Vec<f64>)> {
    let scale = src as f64 / dst as f64;
    let support = 2.0 * scale.max(1.0);
    let stretch = scale.max(1.0);
    (0..dst)
        .map(|k| {
            let centre = (k as f64 + 0.5) * scale - 0.5;
            let lo = ((centre - support).ceil().max(0.0)) as usize;
            let hi = ((centre + support).floor() as i64).min(src as i64 - 1).max(lo as i64) as usize;
            let mut w: Vec<f64> = (lo..=hi).map(|j| keys_cubic((j as f64 - centre) / stretch)).collect();
            let sum: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= sum);
            (lo, w)
        })
        .collect()
}

/// Antialiased bicubic resize: the cubic kernel is widened by the scale
/// factor so it low-passes before decimation. Output is clamped to the input range.
pub fn downsample_antialiased(img: ArrayView2<f64>, target: (usize, usize)) -> Result<Array2<f64>> {
    let (rows, cols) = img.dim();
    if target.0 == 0 || target.1 == 0 {
        return Err(Error::Input("downsample target has a zero dimension".into()));
    }
    if target.0 > rows || target.1 > cols {
        return Err(Error::Input(format!(
            "downsample target {:?} exceeds source {:?}",
            target,
            img.dim()
        )));
    }
    if target == (rows, cols) {
        return Ok(img.to_owned());
    }
    let lo = img.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = img.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let wc = axis_weights(cols, target.1);
    let wr = axis_weights(rows, target.0);
    let mut tmp = Array2::zeros((rows, target.1));
    for r in 0..rows {
        for (c, (start, w)) in wc.iter().enumerate() {
            tmp[(r, c)] = w
                .iter()
                .enumerate()
                .map(|(i, wt)| wt * img[(r, start + i)])
                .sum::<f64>();
        }
    }
    let mut out = Array2::zeros(target);
    for (r, (start, w)) in wr.iter().enumerate() {
        for c in 0..target.1 {
            out[(r, c)] = w
                .iter()
                .enumerate()
                .map(|(i, wt)| wt * tmp[(start + i, c)])
                .sum::<f64>();
        }
    }
    Ok(out.mapv(|v| v.clamp(lo, hi)))
}

/// Zero-pads `img` symmetrically to `dims` (extra row/column goes after).
pub fn pad_centered(img: ArrayView2<f64>, dims: (usize, usize)) -> Result<Array2<f64>> {
    let (h, w) = img.dim();
    if dims.0 < h || dims.1 < w {
        return Err(Error::Dimension(format!(
            "cannot pad {:?} to smaller {:?}",
            img.dim(),
            dims
        )));
    }
    let mut out = Array2::zeros(dims);
    let (r0, c0) = ((dims.0 - h) / 2, (dims.1 - w) / 2);
    out.slice_mut(s![r0..r0 + h, c0..c0 + w]).assign(&img);
    Ok(out)
}

/// Sensor-pitch PSFs plus their working-resolution counterpart.
#[derive(Debug, Clone)]
pub struct PsfBank {
    pub set: PsfSet,
    /// Coded background PSF at the working resolution.
    pub working: Psf,
    /// Peak ratio of coded to uncoded laser PSF on the sensor grid.
    pub lsr: f64,
    pub support_px: usize,
}

impl PsfBank {
    pub fn build(optics: &OpticsConfig, sensor: &SensorModel, dataset: &DatasetConfig) -> Result<Self> {
        optics.validate()?;
        sensor.validate()?;
        dataset.validate()?;
        let fraction = dataset.psf_energy_fraction;
        let make = |lambda: f64| -> Result<(Psf, Psf)> {
            let coded = resample_psf(&synthesize_psf(optics, lambda, true)?, sensor.pixel_pitch)?;
            let uncoded = resample_psf(&synthesize_psf(optics, lambda, false)?, sensor.pixel_pitch)?;
            Ok((coded.crop_to_support(fraction)?, uncoded.crop_to_support(fraction)?))
        };
        let (coded_b, uncoded_b) = make(optics.lambda_b)?;
        let (coded_l, uncoded_l) = if optics.lambda_l == optics.lambda_b {
            (coded_b.clone(), uncoded_b.clone())
        } else {
            make(optics.lambda_l)?
        };
        let lsr = suppression_ratio(&coded_l, &uncoded_l)?;
        let support_px = coded_b.dims().0;
        let working = working_psf(&coded_b, working_scale(sensor, dataset))?;
        Ok(Self {
            set: PsfSet {
                coded_b,
                coded_l,
                uncoded_b,
                uncoded_l,
            },
            working,
            lsr,
            support_px,
        })
    }
}

/// Working-to-sensor size ratio.
pub fn working_scale(sensor: &SensorModel, cfg: &DatasetConfig) -> f64 {
    (cfg.working_size as f64 / sensor.width.max(sensor.height) as f64).min(1.0)
}

fn scaled_dims(dims: (usize, usize), scale: f64) -> (usize, usize) {
    (
        ((dims.0 as f64 * scale).round() as usize).max(1),
        ((dims.1 as f64 * scale).round() as usize).max(1),
    )
}

fn working_psf(psf: &Psf, scale: f64) -> Result<Psf> {
    let (h, w) = psf.dims();
    let odd = |n: usize| {
        let m = ((n as f64 * scale).round() as usize).max(1);
        if m % 2 == 0 { m + 1 } else { m }.min(n)
    };
    let target = (odd(h), odd(w));
    let values = downsample_antialiased(psf.values.view(), target)?.mapv(|v| v.max(0.0));
    let mut out = Psf::from_raw(values, psf.pitch * w as f64 / target.1 as f64, psf.wavelength)?;
    out.raw_energy = psf.raw_energy;
    Ok(out)
}

/// Everything produced for one sample.
#[derive(Debug, Clone)]
pub struct SampleOutput {
    pub spec: SampleSpec,
    pub coded: SensorImage,
    /// Coded image normalised by `s_sat` at working resolution.
    pub coded_working: Array2<f64>,
    pub truth_working: Array2<f64>,
    /// Uncropped background irradiance at working resolution.
    pub irradiance_working: IrradianceMap,
    /// Side lengths of the zero-padded restoration input.
    pub padded_dims: (usize, usize),
    /// Optical power on the image plane, watts.
    pub background_power: f64,
    pub laser_power: f64,
}

/// Runs the forward and sensor models for one resolved draw.
pub fn synthesize_sample(
    spec: &SampleSpec,
    bank: &PsfBank,
    optics: &OpticsConfig,
    sensor: &SensorModel,
    cfg: &DatasetConfig,
    scenes: &SceneStore,
    switches: NoiseSwitches,
) -> Result<SampleOutput> {
    let scene = scenes.load(&spec.scene_id)?;
    let [r, c, h, w] = spec.crop_rect;
    if r + h > scene.nrows() || c + w > scene.ncols() {
        return Err(Error::Input(format!(
            "crop {:?} exceeds scene {} of {}x{}",
            spec.crop_rect,
            spec.scene_id,
            scene.ncols(),
            scene.nrows()
        )));
    }
    if (h, w) != sensor.dims() {
        return Err(Error::Dimension(format!(
            "crop {h}x{w} does not match sensor {:?}",
            sensor.dims()
        )));
    }
    let crop = RadianceMap::new(scene.slice(s![r..r + h, c..c + w]).to_owned())?;
    let sample_sensor = spec.sensor(sensor);
    let i_sat_b = saturation_irradiance(&sample_sensor, optics.lambda_b, spec.exposure);
    let i_sat_l = saturation_irradiance(&sample_sensor, optics.lambda_l, spec.exposure);
    let (i_b, i_l) = form_irradiance(
        &crop,
        &spec.laser(),
        &bank.set,
        optics.focal_length,
        spec.alpha_b,
        i_sat_b,
        i_sat_l,
    )?;
    let pitch2 = i_b.pitch * i_b.pitch;
    let background_power = i_b.values.sum() * pitch2;
    let laser_power = i_l.values.sum() * pitch2;

    let p = photon_rate(
        i_b.values.view(),
        i_l.values.view(),
        optics.lambda_b,
        optics.lambda_l,
        spec.exposure,
        sensor.pixel_pitch,
    )?;
    drop(i_l);
    let omega = sample_photons(p.view(), &spec.photon_model(cfg.photon_law), spec.seed)?;
    drop(p);
    let coded = expose(omega.view(), &sample_sensor, spec.exposure, spec.seed, switches)?;

    let scale = working_scale(sensor, cfg);
    let wdims = scaled_dims(sensor.dims(), scale);
    let coded_working = downsample_antialiased(coded.normalized().view(), wdims)?;
    let truth_working = downsample_antialiased(crop.values().view(), wdims)?;
    let irr_dims = scaled_dims(i_b.dims(), scale);
    let irradiance_working = IrradianceMap {
        values: downsample_antialiased(i_b.values.view(), irr_dims)?,
        pitch: i_b.pitch * i_b.dims().1 as f64 / irr_dims.1 as f64,
    };
    let wh = bank.working.dims();
    let padded_dims = (cfg.padded_size.max(wdims.0 + wh.0), cfg.padded_size.max(wdims.1 + wh.1));
    Ok(SampleOutput {
        spec: spec.clone(),
        coded,
        coded_working,
        truth_working,
        irradiance_working,
        padded_dims,
        background_power,
        laser_power,
    })
}

/// JSON sidecar written next to every emitted frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub spec: SampleSpec,
    pub working_dims: [usize; 2],
    pub padded_dims: [usize; 2],
    pub psf_support_px: usize,
    pub background_power_w: f64,
    pub laser_power_w: f64,
}

impl Sidecar {
    pub fn new(out: &SampleOutput, bank: &PsfBank) -> Self {
        let (h, w) = out.coded_working.dim();
        Self {
            spec: out.spec.clone(),
            working_dims: [h, w],
            padded_dims: [out.padded_dims.0, out.padded_dims.1],
            psf_support_px: bank.support_px,
            background_power_w: out.background_power,
            laser_power_w: out.laser_power,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub index: u64,
    pub spec: SampleSpec,
    pub files: Vec<ManifestFile>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_hashed(dir: &Path, name: String, role: &str, bytes: &[u8]) -> Result<ManifestFile> {
    let path = dir.join(&name);
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(ManifestFile {
        role: role.into(),
        path: name,
        sha256: sha256_hex(bytes),
    })
}

fn png_bytes(dir: &Path, name: &str, values: &Array2<f64>) -> Result<Vec<u8>> {
    // Encode through a file so the bytes are exactly those of the saved PNG.
    let path = dir.join(name);
    imageio::write_unit16(&path, values)?;
    fs::read(&path).map_err(|e| Error::io(&path, e))
}

/// Synthesises and writes one sample; returns its manifest record.
pub fn write_sample(
    out_dir: &Path,
    spec: &SampleSpec,
    bank: &PsfBank,
    optics: &OpticsConfig,
    sensor: &SensorModel,
    cfg: &DatasetConfig,
    scenes: &SceneStore,
) -> Result<ManifestRecord> {
    let out = synthesize_sample(spec, bank, optics, sensor, cfg, scenes, NoiseSwitches::ALL)?;
    let stem = format!("{:06}", spec.index);
    let mut files = Vec::new();
    let coded = png_bytes(out_dir, &format!("{stem}_coded.png"), &out.coded_working)?;
    files.push(ManifestFile {
        role: "coded".into(),
        path: format!("{stem}_coded.png"),
        sha256: sha256_hex(&coded),
    });
    let truth = png_bytes(out_dir, &format!("{stem}_truth.png"), &out.truth_working)?;
    files.push(ManifestFile {
        role: "truth".into(),
        path: format!("{stem}_truth.png"),
        sha256: sha256_hex(&truth),
    });
    let irr = adpf::encode(
        out.irradiance_working.values.view(),
        out.irradiance_working.pitch,
        optics.lambda_b,
    );
    files.push(write_hashed(
        out_dir,
        format!("{stem}_irradiance.adpf"),
        "irradiance",
        &irr,
    )?);
    let sidecar = serde_json::to_vec_pretty(&Sidecar::new(&out, bank))?;
    files.push(write_hashed(out_dir, format!("{stem}.json"), "sidecar", &sidecar)?);
    Ok(ManifestRecord {
        index: spec.index,
        spec: spec.clone(),
        files,
    })
}

/// Result of a dataset run.
#[derive(Debug, Clone)]
pub struct DatasetSummary {
    pub records: Vec<ManifestRecord>,
    pub manifest_path: PathBuf,
    pub manifest_sha256: String,
}

/// Synthesises `count` samples into `out_dir` using `jobs` worker threads.
/// The output is byte-identical for any `jobs`.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_dataset(
    out_dir: &Path,
    count: u64,
    master_seed: u64,
    jobs: usize,
    bank: &PsfBank,
    optics: &OpticsConfig,
    sensor: &SensorModel,
    cfg: &DatasetConfig,
    scenes: &SceneStore,
) -> Result<DatasetSummary> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let specs = (0..count)
        .map(|i| sample_spec(cfg, scenes, sensor, optics.focal_length, i, master_seed))
        .collect::<Result<Vec<_>>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let records = pool.install(|| {
        specs
            .par_iter()
            .map(|spec| write_sample(out_dir, spec, bank, optics, sensor, cfg, scenes))
            .collect::<Result<Vec<_>>>()
    })?;
    let psf_bytes = adpf::encode(bank.working.values.view(), bank.working.pitch, bank.working.wavelength);
    write_hashed(out_dir, "psf_working.adpf".into(), "psf", &psf_bytes)?;

    let mut manifest = Vec::new();
    for r in &records {
        serde_json::to_writer(&mut manifest, r)?;
        manifest.push(b'\n');
    }
    let manifest_path = out_dir.join("manifest.jsonl");
    fs::write(&manifest_path, &manifest).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(DatasetSummary {
        records,
        manifest_path,
        manifest_sha256: sha256_hex(&manifest),
    })
}
