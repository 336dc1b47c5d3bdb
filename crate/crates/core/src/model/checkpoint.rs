use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::classifier::ClassifierParams;
use super::optim::OptimizerState;

pub const CHECKPOINT_FORMAT: &str = "activelabel-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Versioned JSON file holding a model and its optimizer state.
///
/// Floats are written in shortest round-trip form and parsed exactly, so a
/// save/load cycle reproduces every bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub params: ClassifierParams,
    pub optimizer: OptimizerState,
}

impl Checkpoint {
    pub fn new(params: ClassifierParams, optimizer: OptimizerState) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            params,
            optimizer,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "expected {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION}, found {} v{}",
                ckpt.format, ckpt.version
            )));
        }
        ckpt.params.validate()?;
        if !ckpt.optimizer.matches(&ckpt.params) {
            return Err(Error::Format("optimizer moments do not match parameter shapes".into()));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
