//! The `dazzle` command line: argument parsing, config loading and dispatch.
//! Summaries go to stdout as one JSON line; logs go to stderr.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use dazzle_core::synthesis::DegradationPreset;
use dazzle_core::{Error, ErrorKind, Result};
use serde_json::Value;

use commands::{Band, Grid, Mask, SimulateArgs};
use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "dazzle", version, about = "Wavefront-coded anti-dazzle imaging simulator")]
pub struct Cli {
    /// TOML run configuration; every key is optional.
    #[arg(long, global = true, env = "DAZZLE_CONFIG")]
    pub config: Option<PathBuf>,

    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true, env = "DAZZLE_JOBS", default_value_t = 1)]
    pub jobs: usize,

    /// Print the default configuration as TOML and exit.
    #[arg(long)]
    pub print_defaults: bool,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesise a PSF and report its suppression ratio.
    GenPsf {
        #[arg(long, value_enum, default_value = "five-half-ring")]
        mask: Mask,
        #[arg(long, value_enum, default_value = "laser")]
        band: Band,
        #[arg(long, value_enum, default_value = "sensor")]
        grid: Grid,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate one coded sensor frame.
    Simulate {
        /// Grayscale PNG scene; a procedural scene is used if omitted.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        alpha_l: Option<f64>,
        #[arg(long)]
        alpha_b: Option<f64>,
        /// E1, E2, M, H1 or H2; overrides alpha and noise settings.
        #[arg(long)]
        preset: Option<DegradationPreset>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesise a dataset of coded/truth/irradiance triples.
    SynthDataset {
        #[arg(long)]
        count: u64,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory of scene PNGs (overrides `paths.scenes`).
        #[arg(long)]
        scenes: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Wiener-deconvolve one image.
    Restore {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        psf: PathBuf,
        #[arg(long, conflicts_with = "model")]
        gamma: Option<f64>,
        /// Model card written by `fit-gamma`.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the unclamped result as ADPF.
        #[arg(long)]
        raw_out: Option<PathBuf>,
    },
    /// Fit the Wiener regulariser on a synthesised dataset.
    FitGamma {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long, requires = "gamma_hi")]
        gamma_lo: Option<f64>,
        #[arg(long, requires = "gamma_lo")]
        gamma_hi: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score restored images against ground truth.
    Evaluate {
        #[arg(long)]
        restored: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        json: PathBuf,
        #[arg(long)]
        csv: PathBuf,
    },
    /// Estimate read noise from dark frames named `{exposure}_{index}.png`.
    Calibrate {
        #[arg(long)]
        frames: PathBuf,
        /// Uniformly lit gray frames, one PNG per level, for the photon-noise fit.
        #[arg(long)]
        gray: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        bins: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Config | ErrorKind::Input => 2,
        ErrorKind::Io => 3,
        ErrorKind::Numerical => 4,
    }
}

pub fn kind_name(kind: ErrorKind) -> &'static str {
    match kind {
        ErrorKind::Config => "config",
        ErrorKind::Input => "input",
        ErrorKind::Io => "io",
        ErrorKind::Numerical => "numerical",
    }
}

/// The single stderr line printed on failure.
pub fn error_line(e: &Error) -> String {
    let kind = e.kind();
    format!(
        "error code={} kind={} msg={}",
        exit_code(kind),
        kind_name(kind),
        Value::String(e.to_string())
    )
}

/// Runs a parsed command line. `Ok(None)` means nothing to summarise.
pub fn run(cli: &Cli, env: impl IntoIterator<Item = (String, String)>) -> Result<Option<Value>> {
    if cli.print_defaults {
        print!("{}", RunConfig::default().to_toml()?);
        return Ok(None);
    }
    let Some(command) = &cli.command else {
        return Err(Error::Config("no subcommand given (see --help)".into()));
    };
    let cfg = RunConfig::load(cli.config.as_deref(), env)?;
    let jobs = cli.jobs.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(&cfg, command, jobs)).map(Some)
}

fn dispatch(cfg: &RunConfig, command: &Command, jobs: usize) -> Result<Value> {
    match command {
        Command::GenPsf { mask, band, grid, out } => commands::gen_psf(cfg, *mask, *band, *grid, out),
        Command::Simulate {
            scene,
            alpha_l,
            alpha_b,
            preset,
            seed,
            out,
        } => commands::simulate(
            cfg,
            &SimulateArgs {
                scene: scene.clone(),
                alpha_l: *alpha_l,
                alpha_b: *alpha_b,
                preset: *preset,
                seed: *seed,
                out: out.clone(),
            },
        ),
        Command::SynthDataset {
            count,
            seed,
            scenes,
            out,
        } => commands::synth_dataset(cfg, *count, *seed, scenes.as_deref(), out, jobs),
        Command::Restore {
            input,
            psf,
            gamma,
            model,
            out,
            raw_out,
        } => commands::restore(cfg, input, psf, *gamma, model.as_deref(), out, raw_out.as_deref()),
        Command::FitGamma {
            dataset,
            limit,
            gamma_lo,
            gamma_hi,
            out,
        } => {
            let search = gamma_lo.zip(*gamma_hi).map(|(lo, hi)| [lo, hi]);
            commands::fit_gamma_cmd(cfg, dataset, *limit, search, out)
        }
        Command::Evaluate {
            restored,
            truth,
            json,
            csv,
        } => commands::evaluate(cfg, restored, truth, json, csv),
        Command::Calibrate {
            frames,
            gray,
            bins,
            seed,
            out,
        } => commands::calibrate(cfg, frames, gray.as_deref(), *bins, *seed, out),
    }
}
