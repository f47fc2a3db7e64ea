use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Model;
use crate::error::{Error, Result};
use crate::grid::Network;
use crate::nn::AdamState;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialized training state: network, normalizations and optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub case_name: String,
    pub case_fingerprint: String,
    pub epoch: usize,
    pub seed: u64,
    pub model: Model,
    pub adam: AdamState,
}

impl Checkpoint {
    pub fn new(net: &Network, model: &Model, adam: &AdamState, epoch: usize, seed: u64) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            case_name: net.case.name.clone(),
            case_fingerprint: net.case.fingerprint(),
            epoch,
            seed,
            model: model.clone(),
            adam: adam.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        if ckpt.format_version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                ckpt.format_version
            )));
        }
        ckpt.model.surrogate.params.validate()?;
        if ckpt.adam.m.len() != ckpt.model.surrogate.params.len() {
            return Err(Error::Checkpoint(
                "optimizer state does not match the parameters".into(),
            ));
        }
        Ok(ckpt)
    }

    /// Reject a checkpoint trained on a different case.
    pub fn check_case(&self, net: &Network) -> Result<()> {
        if self.case_fingerprint != net.case.fingerprint() {
            return Err(Error::Checkpoint(format!(
                "checkpoint was trained on case `{}` with a different fingerprint",
                self.case_name
            )));
        }
        self.model.check_case(&net.case)
    }
}
