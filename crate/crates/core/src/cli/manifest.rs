use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use mpopf::{Error, Result};

pub const MANIFEST_FILE: &str = "run_manifest.json";

/// Record of one CLI invocation; enough to replay it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    /// Fully resolved settings of the subcommand.
    pub config: Value,
    pub seed: u64,
    pub case_name: String,
    pub case_fingerprint: String,
    pub outputs: Vec<String>,
    pub started_utc: String,
    pub finished_utc: String,
    /// Subcommand-specific extras (timings, summary metrics).
    #[serde(default)]
    pub details: Value,
}

impl RunManifest {
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let mut text =
            serde_json::to_string_pretty(self).map_err(|e| Error::Output(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text)
            .map_err(|e| Error::Output(format!("{}: {e}", path.display())))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

pub fn version() -> String {
    match option_env!("MPOPF_GIT_DESCRIBE") {
        Some(d) if !d.is_empty() => d.to_string(),
        _ => format!("v{}", env!("CARGO_PKG_VERSION")),
    }
}

pub fn utc_now() -> String {
    chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// `<root>/<UTC timestamp>-seed<seed>-<subcommand>`, suffixed when taken.
pub fn new_run_dir(root: &Path, subcommand: &str, seed: u64) -> Result<PathBuf> {
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    let base = format!("{stamp}-seed{seed}-{subcommand}");
    let mut dir = root.join(&base);
    let mut n = 1;
    while dir.exists() {
        n += 1;
        dir = root.join(format!("{base}-{n}"));
    }
    Ok(dir)
}
