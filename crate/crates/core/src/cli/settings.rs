//! Layered settings: built-in defaults, then the subcommand's table in the
//! `--config` file, then flags given on the command line.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use mpopf::training::TrainMode;
use mpopf::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenDataSettings {
    pub case: String,
    pub k: usize,
    pub horizon: usize,
    pub noise: f64,
    pub scale: f64,
    pub seed: u64,
    pub jobs: usize,
    /// Skip solving the exact dispatch for every scenario.
    pub no_labels: bool,
}

impl Default for GenDataSettings {
    fn default() -> Self {
        GenDataSettings {
            case: "case39".into(),
            k: 500,
            horizon: 24,
            noise: 0.1,
            scale: 1.0,
            seed: 7,
            jobs: 1,
            no_labels: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSettings {
    pub case: String,
    pub dataset: Option<String>,
    /// CSV with one row per hour and one column per load (MW).
    pub demand: Option<String>,
    pub scale: f64,
    pub jobs: usize,
}

impl Default for SolveSettings {
    fn default() -> Self {
        SolveSettings {
            case: "case39".into(),
            dataset: None,
            demand: None,
            scale: 1.0,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub case: String,
    pub dataset: Option<String>,
    pub mode: TrainMode,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub patience: usize,
    pub batch_size: usize,
    pub split: Vec<f64>,
    pub jobs: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let d = mpopf::training::TrainConfig::default();
        TrainSettings {
            case: "case39".into(),
            dataset: None,
            mode: d.mode,
            epochs: d.max_epochs,
            lr: d.lr,
            seed: d.seed,
            patience: d.patience,
            batch_size: d.batch_size,
            split: d.split.to_vec(),
            jobs: d.jobs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub case: String,
    pub dataset: Option<String>,
    pub checkpoints: Vec<String>,
    pub scales: Vec<f64>,
    /// Add a row for the exact solver scored against itself.
    pub exact: bool,
    /// Split seed; defaults to the seed stored in the first checkpoint.
    pub seed: Option<u64>,
    pub split: Vec<f64>,
    pub jobs: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            case: "case39".into(),
            dataset: None,
            checkpoints: Vec::new(),
            scales: vec![1.0, 1.025, 1.05],
            exact: true,
            seed: None,
            split: mpopf::training::TrainConfig::default().split.to_vec(),
            jobs: 1,
        }
    }
}

/// Read the `[section]` table of a TOML config file.
pub fn config_section(path: &Path, section: &str) -> Result<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let doc: toml::Table = toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    match doc.get(section) {
        None => Ok(Value::Object(Default::default())),
        Some(v) => serde_json::to_value(v).map_err(|e| Error::Config(e.to_string())),
    }
}

/// `defaults < file < cli`; `cli` only holds flags the user actually passed.
pub fn resolve<T: Serialize + DeserializeOwned + Default>(file: Value, cli: Value) -> Result<T> {
    let mut merged =
        serde_json::to_value(T::default()).map_err(|e| Error::Config(e.to_string()))?;
    for layer in [file, cli] {
        let Value::Object(map) = layer else {
            return Err(Error::Config("settings layer must be a table".into()));
        };
        for (k, v) in map {
            if !v.is_null() {
                merged[k] = v;
            }
        }
    }
    serde_json::from_value(merged).map_err(|e| Error::Config(e.to_string()))
}
