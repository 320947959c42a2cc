use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dazzle_core::calib::{self, GrayLevel};
use dazzle_core::metrics::{evaluate_pair, QualityReport};
use dazzle_core::optics::{resample_psf, suppression_ratio, synthesize_psf};
use dazzle_core::restore::{fit_gamma, wiener_deconvolve, TrainingPair, WienerConfig};
use dazzle_core::synthesis::{
    pad_centered, sample_spec, sha256_hex, synthesize_dataset, write_sample, DegradationPreset, ManifestRecord,
    PsfBank, SceneStore,
};
use dazzle_core::{adpf, imageio, Error, Result};
use log::info;
use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mask {
    None,
    FiveHalfRing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Band {
    Background,
    Laser,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Grid {
    /// Resampled to the sensor pixel pitch and cropped to the energy support.
    Sensor,
    /// The raw Fraunhofer grid.
    Focal,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(v)?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(serde_json::from_slice(&bytes)?)
}

fn file_sha(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(io_err(path))?))
}

pub fn gen_psf(cfg: &RunConfig, mask: Mask, band: Band, grid: Grid, out: &Path) -> Result<Value> {
    let start = Instant::now();
    let optics = &cfg.optics;
    let lambda = match band {
        Band::Background => optics.lambda_b,
        Band::Laser => optics.lambda_l,
    };
    let uncoded = synthesize_psf(optics, lambda, false)?;
    let coded = match mask {
        Mask::None => uncoded.clone(),
        Mask::FiveHalfRing => synthesize_psf(optics, lambda, true)?,
    };
    let lsr = suppression_ratio(&coded, &uncoded)?;
    let energy_ratio = coded.raw_energy / uncoded.raw_energy;
    let coded_s = resample_psf(&coded, cfg.sensor.pixel_pitch)?;
    let uncoded_s = resample_psf(&uncoded, cfg.sensor.pixel_pitch)?;
    let lsr_sensor = suppression_ratio(&coded_s, &uncoded_s)?;
    let fraction = cfg.dataset.psf_energy_fraction;
    let support_px = coded_s.support_width(fraction);
    let emitted = match grid {
        Grid::Sensor => coded_s.crop_to_support(fraction)?,
        Grid::Focal => coded.crop_to_support(fraction)?,
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    adpf::write_psf(out, &emitted)?;
    let (h, w) = emitted.dims();
    info!("PSF written to {} ({w}x{h}, LSR {lsr:.4e})", out.display());
    Ok(json!({
        "command": "gen-psf",
        "mask": match mask { Mask::None => "none", Mask::FiveHalfRing => "five-half-ring" },
        "wavelength_m": lambda,
        "lsr": lsr,
        "lsr_sensor_grid": lsr_sensor,
        "energy_ratio": energy_ratio,
        "raw_energy": coded.raw_energy,
        "support_px": support_px,
        "focal_pitch_m": coded.pitch,
        "out": out,
        "out_pitch_m": emitted.pitch,
        "out_dims": [h, w],
        "sha256": file_sha(out)?,
        "elapsed_s": start.elapsed().as_secs_f64(),
    }))
}

/// Scene store from config: a PNG directory or procedural scenes a little larger than the sensor.
pub fn scene_store(cfg: &RunConfig, dir: Option<&Path>) -> Result<SceneStore> {
    match dir.or(cfg.paths.scenes.as_deref()) {
        Some(d) => SceneStore::from_dir(d),
        None => {
            let m = cfg.paths.procedural_margin;
            Ok(SceneStore::procedural(
                cfg.paths.procedural_scenes,
                (cfg.sensor.height + m, cfg.sensor.width + m),
            ))
        }
    }
}

fn single_scene(path: &Path) -> Result<SceneStore> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::Input(format!("{}: not a file path", path.display())))?
        .to_string();
    if !path.is_file() {
        return Err(Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "scene not found"),
        });
    }
    let parent = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut store = SceneStore::from_dir(parent)?;
    if let SceneStore::Directory { entries, .. } = &mut store {
        entries.retain(|(n, _)| *n == name);
    }
    Ok(store)
}

pub struct SimulateArgs {
    pub scene: Option<PathBuf>,
    pub alpha_l: Option<f64>,
    pub alpha_b: Option<f64>,
    pub preset: Option<DegradationPreset>,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

pub fn simulate(cfg: &RunConfig, args: &SimulateArgs) -> Result<Value> {
    let scenes = match &args.scene {
        Some(p) => single_scene(p)?,
        None => SceneStore::procedural(1, {
            let m = cfg.paths.procedural_margin;
            (cfg.sensor.height + m, cfg.sensor.width + m)
        }),
    };
    let seed = args.seed.unwrap_or(cfg.master_seed);
    // Geometry (crop, laser direction) comes from the seed; noise parameters from the config.
    let mut spec = sample_spec(&cfg.dataset, &scenes, &cfg.sensor, cfg.optics.focal_length, 0, seed)?;
    spec.c1 = cfg.photon.c1;
    spec.c2 = cfg.photon.c2;
    spec.read_mean = cfg.sensor.read_noise_mean;
    spec.read_std = cfg.sensor.read_noise_std;
    spec.dark_mean = cfg.sensor.dark_current_mean;
    spec.exposure = cfg.dataset.exposure_mean;
    spec.alpha_b = args.alpha_b.unwrap_or(0.5);
    spec.alpha_l = args.alpha_l.unwrap_or(0.0);
    if let Some(p) = args.preset {
        spec.apply_preset(p);
    }
    if !(spec.alpha_l >= 0.0 && spec.alpha_b >= 0.0) {
        return Err(Error::Input("--alpha-l and --alpha-b must be nonnegative".into()));
    }
    let dataset = dazzle_core::synthesis::DatasetConfig {
        photon_law: cfg.photon.law,
        ..cfg.dataset.clone()
    };
    info!("building PSF bank");
    let bank = PsfBank::build(&cfg.optics, &cfg.sensor, &dataset)?;
    create_dir(&args.out)?;
    let record = write_sample(&args.out, &spec, &bank, &cfg.optics, &cfg.sensor, &dataset, &scenes)?;
    adpf::write_psf(&args.out.join("psf_working.adpf"), &bank.working)?;
    let sidecar: Value = read_json(&args.out.join(format!("{:06}.json", spec.index)))?;
    Ok(json!({
        "command": "simulate",
        "out": args.out,
        "lsr": bank.lsr,
        "psf_support_px": bank.support_px,
        "files": record.files,
        "sidecar": sidecar,
    }))
}

pub fn synth_dataset(
    cfg: &RunConfig,
    count: u64,
    seed: Option<u64>,
    scenes: Option<&Path>,
    out: &Path,
    jobs: usize,
) -> Result<Value> {
    let start = Instant::now();
    let store = scene_store(cfg, scenes)?;
    let seed = seed.unwrap_or(cfg.master_seed);
    info!("building PSF bank");
    let bank = PsfBank::build(&cfg.optics, &cfg.sensor, &cfg.dataset)?;
    info!("synthesising {count} samples with {jobs} worker(s)");
    let summary = synthesize_dataset(
        out,
        count,
        seed,
        jobs,
        &bank,
        &cfg.optics,
        &cfg.sensor,
        &cfg.dataset,
        &store,
    )?;
    Ok(json!({
        "command": "synth-dataset",
        "count": count,
        "master_seed": seed,
        "out": out,
        "manifest": summary.manifest_path,
        "manifest_sha256": summary.manifest_sha256,
        "lsr": bank.lsr,
        "psf_support_px": bank.support_px,
        "elapsed_s": start.elapsed().as_secs_f64(),
    }))
}

/// Fitted regulariser plus what it was fitted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCard {
    pub gamma: f64,
    pub loss: f64,
    pub evaluations: usize,
    pub search: [f64; 2],
    pub pairs: usize,
    pub manifest_sha256: String,
}

fn padded_dims(cfg: &RunConfig, img: (usize, usize), psf: (usize, usize)) -> (usize, usize) {
    (
        cfg.dataset.padded_size.max(img.0 + psf.0),
        cfg.dataset.padded_size.max(img.1 + psf.1),
    )
}

fn crop_center(img: &Array2<f64>, dims: (usize, usize)) -> Array2<f64> {
    let (r0, c0) = ((img.nrows() - dims.0) / 2, (img.ncols() - dims.1) / 2);
    img.slice(s![r0..r0 + dims.0, c0..c0 + dims.1]).to_owned()
}

pub fn restore(
    cfg: &RunConfig,
    input: &Path,
    psf_path: &Path,
    gamma: Option<f64>,
    model: Option<&Path>,
    out: &Path,
    raw_out: Option<&Path>,
) -> Result<Value> {
    let gamma = match (gamma, model) {
        (Some(g), _) => g,
        (None, Some(m)) => read_json::<ModelCard>(m)?.gamma,
        (None, None) => cfg.restore.gamma,
    };
    let img = imageio::read_unit(input)?;
    let psf = adpf::read_psf(psf_path)?;
    let pad = padded_dims(cfg, img.dim(), psf.dims());
    let padded = pad_centered(img.view(), pad)?;
    let wcfg = WienerConfig {
        gamma,
        epsilon_floor: cfg.restore.epsilon_floor,
    };
    let (restored, diag) = wiener_deconvolve(padded.view(), &psf, &wcfg)?;
    if !restored.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical("Wiener output contains non-finite values".into()));
    }
    let cropped = crop_center(&restored, img.dim());
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    imageio::write_unit16(out, &cropped.mapv(|v| v.clamp(0.0, 1.0)))?;
    if let Some(raw) = raw_out {
        adpf::write(raw, cropped.view(), psf.pitch, psf.wavelength)?;
    }
    Ok(json!({
        "command": "restore",
        "gamma": gamma,
        "padded_dims": [pad.0, pad.1],
        "diagnostics": diag,
        "out": out,
        "sha256": file_sha(out)?,
    }))
}

fn read_manifest(dir: &Path) -> Result<(Vec<ManifestRecord>, String)> {
    let path = dir.join("manifest.jsonl");
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    let records = bytes
        .split(|b| *b == b'\n')
        .filter(|l| !l.is_empty())
        .map(serde_json::from_slice)
        .collect::<std::result::Result<Vec<ManifestRecord>, _>>()?;
    Ok((records, sha256_hex(&bytes)))
}

fn role_path(dir: &Path, rec: &ManifestRecord, role: &str) -> Result<PathBuf> {
    rec.files
        .iter()
        .find(|f| f.role == role)
        .map(|f| dir.join(&f.path))
        .ok_or_else(|| Error::Format {
            format: "manifest",
            reason: format!("sample {} has no {role} file", rec.index),
        })
}

pub fn fit_gamma_cmd(
    cfg: &RunConfig,
    dataset: &Path,
    limit: Option<usize>,
    search: Option<[f64; 2]>,
    out: &Path,
) -> Result<Value> {
    let (records, manifest_sha256) = read_manifest(dataset)?;
    let psf = adpf::read_psf(&dataset.join("psf_working.adpf"))?;
    let take = limit.unwrap_or(records.len()).min(records.len());
    let mut pairs = Vec::with_capacity(take);
    for rec in &records[..take] {
        let coded = imageio::read_unit(&role_path(dataset, rec, "coded")?)?;
        let truth = imageio::read_unit(&role_path(dataset, rec, "truth")?)?;
        let pad = padded_dims(cfg, coded.dim(), psf.dims());
        pairs.push(TrainingPair {
            degraded: pad_centered(coded.view(), pad)?,
            truth,
            psf: psf.clone(),
        });
    }
    let [lo, hi] = search.unwrap_or(cfg.restore.gamma_search);
    info!("fitting gamma on {} pairs over [{lo:e}, {hi:e}]", pairs.len());
    let fit = fit_gamma(&pairs, lo, hi)?;
    let card = ModelCard {
        gamma: fit.gamma,
        loss: fit.loss,
        evaluations: fit.evaluations,
        search: fit.search,
        pairs: pairs.len(),
        manifest_sha256,
    };
    write_json(out, &card)?;
    Ok(json!({ "command": "fit-gamma", "out": out, "model": card }))
}

fn png_names(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for e in fs::read_dir(dir).map_err(io_err(dir))? {
        let name = e.map_err(io_err(dir))?.file_name().to_string_lossy().into_owned();
        if name.to_ascii_lowercase().ends_with(".png") {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

/// Pairs restored and truth images: two files, or same-named PNGs in two directories.
/// A restored image larger than its truth is centre-cropped to it.
pub fn evaluate(cfg: &RunConfig, restored: &Path, truth: &Path, json_out: &Path, csv_out: &Path) -> Result<Value> {
    let pairs: Vec<(String, PathBuf, PathBuf)> = if restored.is_dir() && truth.is_dir() {
        let theirs = png_names(truth)?;
        png_names(restored)?
            .into_iter()
            .filter(|n| theirs.contains(n))
            .map(|n| (n.clone(), restored.join(&n), truth.join(&n)))
            .collect()
    } else {
        let name = restored
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        vec![(name, restored.to_path_buf(), truth.to_path_buf())]
    };
    if pairs.is_empty() {
        return Err(Error::Input(format!(
            "no matching PNG names in {} and {}",
            restored.display(),
            truth.display()
        )));
    }
    let mut rows = Vec::with_capacity(pairs.len());
    for (name, r, t) in &pairs {
        let (x, y) = (imageio::read_unit(r)?, imageio::read_unit(t)?);
        let x = if x.nrows() >= y.nrows() && x.ncols() >= y.ncols() {
            crop_center(&x, y.dim())
        } else {
            x
        };
        rows.push(evaluate_pair(name, x.view(), y.view(), &cfg.metrics)?);
    }
    let report = QualityReport::new(rows);
    report.write(json_out, csv_out)?;
    Ok(json!({
        "command": "evaluate",
        "pairs": report.rows.len(),
        "rows": report.rows,
        "mean": report.mean,
        "json": json_out,
        "csv": csv_out,
    }))
}

pub fn calibrate(
    cfg: &RunConfig,
    frames: &Path,
    gray: Option<&Path>,
    bins: usize,
    seed: Option<u64>,
    out: &Path,
) -> Result<Value> {
    let groups = calib::load_dark_frames(frames)?;
    let mut result = calib::estimate_read_noise(&groups, &cfg.sensor)?;
    calib::compare_with_simulation(&mut result, &groups, &cfg.sensor, bins, seed.unwrap_or(cfg.master_seed))?;
    let photon = match gray {
        Some(dir) => {
            let mut levels = Vec::new();
            for name in png_names(dir)? {
                levels.push(GrayLevel::from_patch(imageio::read_counts(&dir.join(name))?.view()));
            }
            Some(calib::fit_photon_coefficients(&levels, &cfg.sensor)?)
        }
        None => None,
    };
    let report = json!({
        "calibration": result,
        "photon_fit": photon,
        "note": "counts are converted to electrons by dividing by the gain; the -0.5 count dither bias is not removed",
    });
    write_json(out, &report)?;
    Ok(json!({ "command": "calibrate", "out": out, "report": report }))
}
