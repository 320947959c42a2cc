//! Run configuration: one TOML file, every key optional, unknown keys rejected.
//!
//! Any key can also be overridden from the environment as
//! `DAZZLE_<SECTION>__<KEY>=<toml value>`, e.g. `DAZZLE_SENSOR__GAIN=0.4` or
//! `DAZZLE_MASTER_SEED=7`. Values that do not parse as TOML are taken as strings.

use std::path::{Path, PathBuf};

use dazzle_core::metrics::SsimConfig;
use dazzle_core::optics::OpticsConfig;
use dazzle_core::sensor::{PhotonModel, SensorModel};
use dazzle_core::synthesis::DatasetConfig;
use dazzle_core::{Error, Result};
use serde::{Deserialize, Serialize};

pub const ENV_PREFIX: &str = "DAZZLE_";

/// `DAZZLE_*` variables that are flags or logging, not config keys.
const RESERVED_ENV: [&str; 3] = ["CONFIG", "JOBS", "LOG"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RestoreSettings {
    /// Wiener regulariser used when no model card is given.
    pub gamma: f64,
    pub epsilon_floor: f64,
    /// `[lo, hi]` bracket for `fit-gamma`.
    pub gamma_search: [f64; 2],
}

impl Default for RestoreSettings {
    fn default() -> Self {
        Self {
            gamma: 1e-3,
            epsilon_floor: 1e-12,
            gamma_search: [1e-8, 1e2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathSettings {
    /// Directory of grayscale PNG scenes; procedural scenes are used when unset.
    pub scenes: Option<PathBuf>,
    pub procedural_scenes: usize,
    /// Extra rows/columns of procedural scenes beyond the sensor size, for random crops.
    pub procedural_margin: usize,
}

impl Default for PathSettings {
    fn default() -> Self {
        Self {
            scenes: None,
            procedural_scenes: 16,
            procedural_margin: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub master_seed: u64,
    pub optics: OpticsConfig,
    pub sensor: SensorModel,
    /// Photon-noise coefficients for `simulate`; datasets draw their own.
    pub photon: PhotonModel,
    pub dataset: DatasetConfig,
    pub restore: RestoreSettings,
    pub metrics: SsimConfig,
    pub paths: PathSettings,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.optics.validate()?;
        self.sensor.validate()?;
        self.photon.validate()?;
        self.dataset.validate()?;
        let [lo, hi] = self.restore.gamma_search;
        if !(self.restore.gamma >= 0.0 && lo > 0.0 && hi > lo && self.restore.epsilon_floor > 0.0) {
            return Err(Error::Config(format!(
                "restore: need gamma >= 0, 0 < gamma_search[0] < gamma_search[1] and epsilon_floor > 0, got gamma={} search=[{lo}, {hi}]",
                self.restore.gamma
            )));
        }
        if self.paths.scenes.is_none() && self.paths.procedural_scenes == 0 {
            return Err(Error::Config(
                "paths.procedural_scenes must be > 0 when paths.scenes is unset".into(),
            ));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("cannot serialise config: {e}")))
    }

    /// Defaults, then the optional file, then environment overrides; validated.
    pub fn load(path: Option<&Path>, env: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                    path: p.to_path_buf(),
                    source: e,
                })?;
                text.parse::<toml::Table>()
                    .map_err(|e| Error::Config(format!("{}: {}", p.display(), one_line(&e.to_string()))))?
            }
            None => toml::Table::new(),
        };
        apply_env(&mut table, env)?;
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(one_line(&e.to_string())))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn parse_env_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn apply_env(table: &mut toml::Table, env: impl IntoIterator<Item = (String, String)>) -> Result<()> {
    let mut vars: Vec<(String, String)> = env
        .into_iter()
        .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|s| (s.to_string(), v)))
        .filter(|(k, _)| !RESERVED_ENV.contains(&k.as_str()))
        .collect();
    vars.sort();
    for (key, raw) in vars {
        let path: Vec<String> = key.split("__").map(|s| s.to_ascii_lowercase()).collect();
        if path.iter().any(|s| s.is_empty()) {
            return Err(Error::Config(format!("malformed override {ENV_PREFIX}{key}")));
        }
        let (last, sections) = path.split_last().expect("split yields at least one part");
        let mut node = &mut *table;
        for s in sections {
            node = node
                .entry(s.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("{ENV_PREFIX}{key}: `{s}` is not a section")))?;
        }
        node.insert(last.clone(), parse_env_value(&raw));
    }
    Ok(())
}
