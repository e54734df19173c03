//! Flat TOML run configuration: dataset and output locations plus every
//! [`TrainConfig`] key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trisplat_core::train::TrainConfig;

use crate::error::{IoError, Result};

/// Keys that describe the run rather than the optimization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    /// NeRF-synthetic style dataset directory.
    pub dataset: PathBuf,
    pub output: PathBuf,
    /// Initial point cloud; random points are used when absent.
    pub point_cloud: Option<PathBuf>,
    pub random_points: usize,
    pub downscale: usize,
    pub background: [f64; 3],
    pub linearize: bool,
    /// Snapshot cadence in iterations (0: only the final scene).
    pub snapshot_interval: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("data"),
            output: PathBuf::from("output"),
            point_cloud: None,
            random_points: 10_000,
            downscale: 1,
            background: [1.0; 3],
            linearize: false,
            snapshot_interval: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub run: RunSettings,
    pub train: TrainConfig,
}

const RUN_KEYS: [&str; 8] = [
    "dataset",
    "output",
    "point_cloud",
    "random_points",
    "downscale",
    "background",
    "linearize",
    "snapshot_interval",
];

pub fn parse_run_config(text: &str, path: &Path) -> Result<RunConfig> {
    let mut table: toml::Table = text.parse().map_err(|e| IoError::format(path, e))?;
    let mut run_table = toml::Table::new();
    for key in RUN_KEYS {
        if let Some(v) = table.remove(key) {
            run_table.insert(key.to_string(), v);
        }
    }
    let mut run: RunSettings =
        toml::Value::Table(run_table).try_into().map_err(|e| IoError::format(path, e))?;
    let train: TrainConfig = toml::Value::Table(table).try_into().map_err(|e| IoError::format(path, e))?;
    train.validate().map_err(|e| IoError::format(path, e))?;
    if run.downscale == 0 {
        return Err(IoError::format(path, "downscale must be at least 1"));
    }
    // relative paths are resolved against the config file's directory
    let base = path.parent().unwrap_or(Path::new(""));
    run.dataset = base.join(&run.dataset);
    run.output = base.join(&run.output);
    run.point_cloud = run.point_cloud.map(|p| base.join(p));
    Ok(RunConfig { run, train })
}

pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    parse_run_config(&text, path)
}

/// The default configuration as TOML text.
pub fn default_config_toml() -> String {
    render_config_toml(&RunSettings::default(), &TrainConfig::default())
}

pub fn render_config_toml(run: &RunSettings, train: &TrainConfig) -> String {
    let mut out = toml::to_string(run).expect("run settings serialize");
    out.push_str(&toml::to_string(train).expect("train config serializes"));
    out
}
