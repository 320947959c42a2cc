//! Browser bindings: PSF viewer, dazzle simulation and Wiener restoration on a
//! small sensor. The `*_image` functions are plain Rust; the `Demo` wrapper only
//! converts errors for JavaScript.

use dazzle_core::metrics::mse_psnr;
use dazzle_core::optics::{suppression_ratio, synthesize_psf, OpticsConfig};
use dazzle_core::restore::{wiener_deconvolve, WienerConfig};
use dazzle_core::sensor::{NoiseSwitches, SensorModel};
use dazzle_core::synthesis::{
    pad_centered, sample_spec, synthesize_sample, DatasetConfig, PsfBank, SampleOutput, SceneStore,
};
use dazzle_core::Result;
use ndarray::{s, Array2};
use wasm_bindgen::prelude::*;

pub const SENSOR_SIDE: usize = 128;

/// 8-bit RGBA image ready for `ImageData`, plus a scalar for the caption.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Image {
    width: usize,
    height: usize,
    rgba: Vec<u8>,
    value: f64,
}

#[wasm_bindgen]
impl Image {
    #[wasm_bindgen(getter)]
    pub fn width(&self) -> usize {
        self.width
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> usize {
        self.height
    }

    #[wasm_bindgen(getter)]
    pub fn rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }

    /// LSR for a PSF, saturated fraction for a frame, PSNR (dB) for a restoration.
    #[wasm_bindgen(getter)]
    pub fn value(&self) -> f64 {
        self.value
    }
}

impl Image {
    /// Gray image from values in [0, 1]; values outside are clamped.
    pub fn gray(img: &Array2<f64>, value: f64) -> Self {
        let (height, width) = img.dim();
        let mut rgba = Vec::with_capacity(width * height * 4);
        for v in img.iter() {
            let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
            rgba.extend_from_slice(&[g, g, g, 255]);
        }
        Self {
            width,
            height,
            rgba,
            value,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }
}

fn crop_center(img: &Array2<f64>, dims: (usize, usize)) -> Array2<f64> {
    let (r0, c0) = ((img.nrows() - dims.0) / 2, (img.ncols() - dims.1) / 2);
    img.slice(s![r0..r0 + dims.0, c0..c0 + dims.1]).to_owned()
}

/// Small end-to-end rig. Working resolution equals the sensor, so restoration
/// uses the sensor-pitch PSF directly.
pub struct Rig {
    optics: OpticsConfig,
    sensor: SensorModel,
    dataset: DatasetConfig,
    scenes: SceneStore,
    coded: PsfBank,
    uncoded: PsfBank,
    frame: Option<(SampleOutput, bool)>,
}

impl Rig {
    pub fn new(pupil_samples: usize) -> Result<Self> {
        let optics = OpticsConfig::default().with_pupil_samples(pupil_samples);
        let sensor = SensorModel {
            width: SENSOR_SIDE,
            height: SENSOR_SIDE,
            ..SensorModel::default()
        };
        let dataset = DatasetConfig {
            working_size: SENSOR_SIDE,
            padded_size: SENSOR_SIDE,
            ..DatasetConfig::default()
        };
        let coded = PsfBank::build(&optics, &sensor, &dataset)?;
        let mut uncoded = coded.clone();
        uncoded.set.coded_b = coded.set.uncoded_b.clone();
        uncoded.set.coded_l = coded.set.uncoded_l.clone();
        uncoded.working = coded.set.uncoded_b.clone();
        uncoded.lsr = 1.0;
        Ok(Self {
            optics,
            sensor,
            dataset,
            scenes: SceneStore::procedural(8, (SENSOR_SIDE + 32, SENSOR_SIDE + 32)),
            coded,
            uncoded,
            frame: None,
        })
    }

    pub fn lsr(&self) -> f64 {
        self.coded.lsr
    }

    /// Focal-plane laser PSF over four decades; the value is the suppression ratio.
    pub fn psf_image(&self, coded: bool) -> Result<Image> {
        let c = synthesize_psf(&self.optics, self.optics.lambda_l, true)?;
        let u = synthesize_psf(&self.optics, self.optics.lambda_l, false)?;
        let lsr = suppression_ratio(&c, &u)?;
        let shown = if coded { c } else { u };
        // Peak of the coded PSF relative to the uncoded one is the whole point, so share the scale.
        let peak = shown.peak() / if coded { lsr } else { 1.0 };
        let img = shown.values.mapv(|v| 1.0 + (v / peak).max(1e-30).log10() / 4.0);
        Ok(Image::gray(&img, if coded { lsr } else { 1.0 }))
    }

    /// One sensor frame of scene `seed % 8` with an on-axis laser at `alpha_l`·I_sat; the
    /// value is the fraction of saturated pixels.
    pub fn simulate_image(&mut self, alpha_l: f64, coded: bool, seed: u64) -> Result<Image> {
        let mut spec = sample_spec(
            &self.dataset,
            &self.scenes,
            &self.sensor,
            self.optics.focal_length,
            seed,
            99,
        )?;
        spec.alpha_l = alpha_l;
        spec.laser_direction = [0.0, 0.0];
        spec.alpha_b = 0.5;
        spec.c1 = 0.01;
        spec.read_mean = self.sensor.read_noise_mean;
        spec.read_std = self.sensor.read_noise_std;
        spec.exposure = 0.1;
        let bank = if coded { &self.coded } else { &self.uncoded };
        let out = synthesize_sample(
            &spec,
            bank,
            &self.optics,
            &self.sensor,
            &self.dataset,
            &self.scenes,
            NoiseSwitches::ALL,
        )?;
        // A full well reads G·e_sat give or take the half-count dither.
        let full = (self.sensor.gain * self.sensor.full_well - 0.5).floor() as u16;
        let clipped = out.coded.counts.iter().filter(|c| **c >= full).count() as f64 / out.coded.counts.len() as f64;
        let img = Image::gray(&(&out.coded_working * self.full_well_scale()), clipped);
        self.frame = Some((out, coded));
        Ok(img)
    }

    /// Ground truth of the last simulated frame.
    pub fn truth_image(&self) -> Option<Image> {
        self.frame.as_ref().map(|(f, _)| Image::gray(&f.truth_working, 0.0))
    }

    /// Factor that maps a normalised frame so a full well reads 1. A full well is only
    /// G·e_sat of the 2^bits − 1 counts, so unscaled frames would display nearly black.
    fn full_well_scale(&self) -> f64 {
        ((1u64 << self.sensor.bit_depth) - 1) as f64 / (self.sensor.gain * self.sensor.full_well)
    }

    /// Wiener restoration of the last frame. Counts and scene radiance differ by an unknown
    /// global gain (α_b, exposure, well depth), so the result is shown and scored after the
    /// least-squares gain against the truth; the value is that PSNR.
    pub fn restore_image(&self, gamma: f64) -> Result<Image> {
        let Some((frame, coded)) = &self.frame else {
            return Err(dazzle_core::Error::Input("simulate a frame first".into()));
        };
        let bank = if *coded { &self.coded } else { &self.uncoded };
        let padded = pad_centered(frame.coded_working.view(), frame.padded_dims)?;
        let (restored, _) = wiener_deconvolve(padded.view(), &bank.working, &WienerConfig::with_gamma(gamma))?;
        let out = crop_center(&restored, frame.truth_working.dim());
        let truth = &frame.truth_working;
        let gain = (&out * truth).sum() / (&out * &out).sum().max(f64::MIN_POSITIVE);
        let out = out.mapv(|v| (gain * v).clamp(0.0, 1.0));
        let (_, psnr) = mse_psnr(out.view(), truth.view())?;
        Ok(Image::gray(&out, psnr))
    }
}

fn js(e: dazzle_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo(Rig);

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(pupil_samples: usize) -> std::result::Result<Demo, JsError> {
        Rig::new(pupil_samples).map(Demo).map_err(js)
    }

    pub fn lsr(&self) -> f64 {
        self.0.lsr()
    }

    pub fn psf(&self, coded: bool) -> std::result::Result<Image, JsError> {
        self.0.psf_image(coded).map_err(js)
    }

    pub fn simulate(&mut self, alpha_l: f64, coded: bool, seed: u32) -> std::result::Result<Image, JsError> {
        self.0.simulate_image(alpha_l, coded, seed as u64).map_err(js)
    }

    pub fn truth(&self) -> Option<Image> {
        self.0.truth_image()
    }

    pub fn restore(&self, gamma: f64) -> std::result::Result<Image, JsError> {
        self.0.restore_image(gamma).map_err(js)
    }
}
