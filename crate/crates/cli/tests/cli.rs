use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dazzle_cli::config::RunConfig;
use dazzle_core::calib::EXPOSURE_LADDER;
use dazzle_core::optics::OpticsConfig;
use dazzle_core::sensor::{expose, NoiseSwitches, SensorModel};
use dazzle_core::synthesis::DatasetConfig;
use dazzle_core::{adpf, imageio};
use ndarray::Array2;
use serde_json::Value;

fn small_config(dir: &Path) -> PathBuf {
    let cfg = RunConfig {
        optics: OpticsConfig::default().with_pupil_samples(256),
        sensor: SensorModel {
            width: 96,
            height: 80,
            ..SensorModel::default()
        },
        dataset: DatasetConfig {
            working_size: 48,
            padded_size: 64,
            ..DatasetConfig::default()
        },
        ..RunConfig::default()
    };
    let path = dir.join("small.toml");
    std::fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    path
}

fn dazzle(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dazzle"))
        .current_dir(dir)
        .env("DAZZLE_LOG", "off")
        .env_remove("DAZZLE_CONFIG")
        .env_remove("DAZZLE_JOBS")
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Value {
    let out = dazzle(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1, "{text}");
    serde_json::from_str(&text).unwrap()
}

fn fails(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = dazzle(dir, args);
    assert!(!out.status.success());
    (out.status.code().unwrap(), String::from_utf8(out.stderr).unwrap())
}

#[test]
fn printed_defaults_parse_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = dazzle(dir.path(), &["--print-defaults"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let back: RunConfig = toml::from_str(&text).unwrap();
    assert_eq!(back, RunConfig::default());
}

#[test]
fn unmasked_psf_has_unit_suppression() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path());
    let none = ok(
        dir.path(),
        &[
            "--config",
            "small.toml",
            "gen-psf",
            "--mask",
            "none",
            "--out",
            "flat.adpf",
        ],
    );
    assert_eq!(none["lsr"], 1.0);
    let coded = ok(
        dir.path(),
        &["--config", "small.toml", "gen-psf", "--out", "psf/coded.adpf"],
    );
    assert!(coded["lsr"].as_f64().unwrap() < 0.1);
    assert!((coded["energy_ratio"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    let psf = adpf::read_psf(&dir.path().join("psf/coded.adpf")).unwrap();
    assert_eq!(psf.pitch, 5.4e-6);
    let dims = coded["out_dims"].as_array().unwrap();
    assert_eq!(psf.dims().0 as u64, dims[0].as_u64().unwrap());
}

#[test]
fn pipeline_from_dataset_to_quality_report() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path());
    let p = dir.path();
    let synth = ok(
        p,
        &[
            "--config",
            "small.toml",
            "--jobs",
            "2",
            "synth-dataset",
            "--count",
            "3",
            "--seed",
            "5",
            "--out",
            "ds",
        ],
    );
    assert_eq!(synth["count"], 3);
    assert_eq!(synth["manifest_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(
        std::fs::read_to_string(p.join("ds/manifest.jsonl"))
            .unwrap()
            .lines()
            .count(),
        3
    );

    let fit = ok(
        p,
        &[
            "--config",
            "small.toml",
            "fit-gamma",
            "--dataset",
            "ds",
            "--limit",
            "2",
            "--gamma-lo",
            "1e-6",
            "--gamma-hi",
            "1",
            "--out",
            "model.json",
        ],
    );
    let gamma = fit["model"]["gamma"].as_f64().unwrap();
    assert!((1e-6..=1.0).contains(&gamma));
    assert_eq!(fit["model"]["pairs"], 2);
    assert_eq!(fit["model"]["manifest_sha256"], synth["manifest_sha256"]);

    for i in 0..3 {
        let name = format!("{i:06}_truth.png");
        let r = ok(
            p,
            &[
                "--config",
                "small.toml",
                "restore",
                "--input",
                &format!("ds/{i:06}_coded.png"),
                "--psf",
                "ds/psf_working.adpf",
                "--model",
                "model.json",
                "--out",
                &format!("restored/{name}"),
            ],
        );
        assert_eq!(r["gamma"].as_f64().unwrap(), gamma);
        let img = imageio::read_unit(&p.join("restored").join(&name)).unwrap();
        let truth = imageio::read_unit(&p.join("ds").join(&name)).unwrap();
        assert_eq!(img.dim(), truth.dim());
    }

    let eval = ok(
        p,
        &[
            "--config",
            "small.toml",
            "evaluate",
            "--restored",
            "restored",
            "--truth",
            "ds",
            "--json",
            "q.json",
            "--csv",
            "q.csv",
        ],
    );
    assert_eq!(eval["pairs"], 3);
    let csv = std::fs::read_to_string(p.join("q.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.contains("__mean__"));
    let q: Value = serde_json::from_str(&std::fs::read_to_string(p.join("q.json")).unwrap()).unwrap();
    assert!(q["rows"].as_array().unwrap().len() == 3);
}

#[test]
fn restore_with_explicit_gamma_and_raw_output() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let img = Array2::from_shape_fn((20, 24), |(r, c)| ((r * 24 + c) % 7) as f64 / 7.0);
    imageio::write_unit16(&p.join("in.png"), &img).unwrap();
    let delta = Array2::from_shape_fn((3, 3), |(r, c)| if (r, c) == (1, 1) { 1.0 } else { 0.0 });
    adpf::write(&p.join("delta.adpf"), delta.view(), 5.4e-6, 633e-9).unwrap();
    let r = ok(
        p,
        &[
            "restore",
            "--input",
            "in.png",
            "--psf",
            "delta.adpf",
            "--gamma",
            "0",
            "--out",
            "o.png",
            "--raw-out",
            "o.adpf",
        ],
    );
    assert_eq!(r["gamma"], 0.0);
    let back = imageio::read_unit(&p.join("o.png")).unwrap();
    let orig = imageio::read_unit(&p.join("in.png")).unwrap();
    assert_eq!(back.dim(), (20, 24));
    assert!(back.iter().zip(orig.iter()).all(|(a, b)| (a - b).abs() < 1e-4));
    assert!(adpf::read(&p.join("o.adpf")).is_ok());
}

#[test]
fn simulate_uses_given_scene_and_env_overrides() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path());
    let p = dir.path();
    std::fs::create_dir(p.join("scenes")).unwrap();
    let scene = Array2::from_shape_fn((100, 120), |(r, c)| (r + c) as f64 / 220.0);
    imageio::write_unit16(&p.join("scenes/ramp.png"), &scene).unwrap();
    imageio::write_unit16(&p.join("scenes/other.png"), &scene).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_dazzle"))
        .current_dir(p)
        .env("DAZZLE_LOG", "off")
        .env("DAZZLE_PHOTON__C1", "0.07")
        .args([
            "--config",
            "small.toml",
            "simulate",
            "--scene",
            "scenes/ramp.png",
            "--alpha-l",
            "1e4",
            "--out",
            "sim",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let spec = &v["sidecar"]["spec"];
    assert_eq!(spec["scene_id"], "ramp.png");
    assert_eq!(spec["c1"], 0.07);
    assert_eq!(spec["alpha_l"], 1e4);
    assert!(spec["preset"].is_null());
    for f in [
        "000000_coded.png",
        "000000_truth.png",
        "000000_irradiance.adpf",
        "000000.json",
        "psf_working.adpf",
    ] {
        assert!(p.join("sim").join(f).is_file(), "{f}");
    }
    let coded = imageio::read_counts(&p.join("sim/000000_coded.png")).unwrap();
    let wd = &v["sidecar"]["working_dims"];
    assert_eq!(
        coded.dim(),
        (wd[0].as_u64().unwrap() as usize, wd[1].as_u64().unwrap() as usize)
    );
}

#[test]
fn calibrate_recovers_read_noise() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let sens = SensorModel {
        width: 200,
        height: 200,
        ..SensorModel::default()
    };
    std::fs::create_dir(p.join("dark")).unwrap();
    for t in EXPOSURE_LADDER {
        for i in 0..2 {
            let img = expose(Array2::zeros(sens.dims()).view(), &sens, t, 31 + i, NoiseSwitches::ALL).unwrap();
            imageio::write_counts(&p.join(format!("dark/{t}_{i}.png")), &img.counts).unwrap();
        }
    }
    let v = ok(
        p,
        &["calibrate", "--frames", "dark", "--bins", "32", "--out", "calib.json"],
    );
    let mu = v["report"]["calibration"]["mu_r"].as_f64().unwrap();
    assert!((mu - 390.0).abs() < 5.0, "{mu}");
    assert!(v["report"]["photon_fit"].is_null());
    assert!(p.join("calib.json").is_file());
}

#[test]
fn errors_are_one_line_with_mapped_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path());
    let p = dir.path();
    std::fs::write(p.join("bad.toml"), "[sensor]\ngian = 0.4\n").unwrap();

    let (code, err) = fails(p, &["--config", "bad.toml", "gen-psf", "--out", "x.adpf"]);
    assert_eq!(code, 2);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error code=2 kind=config msg=\""), "{err}");

    let (code, err) = fails(
        p,
        &[
            "restore",
            "--input",
            "missing.png",
            "--psf",
            "missing.adpf",
            "--out",
            "o.png",
        ],
    );
    assert_eq!(code, 3);
    assert!(err.starts_with("error code=3 kind=io"), "{err}");

    let (code, err) = fails(p, &["--config", "small.toml", "simulate", "--alpha-l=-5", "--out", "s"]);
    assert_eq!(code, 2);
    assert!(err.contains("kind=input"), "{err}");

    let (code, _) = fails(p, &["simulate", "--preset", "X9", "--out", "s"]);
    assert_eq!(code, 2);

    std::fs::write(p.join("notpsf.adpf"), b"garbage").unwrap();
    imageio::write_unit16(&p.join("in.png"), &Array2::zeros((4, 4))).unwrap();
    let (code, err) = fails(
        p,
        &["restore", "--input", "in.png", "--psf", "notpsf.adpf", "--out", "o.png"],
    );
    assert_eq!(code, 3);
    assert!(err.contains("ADPF"), "{err}");
}
