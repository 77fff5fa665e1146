//! Versioned JSON snapshots of a trained model.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::hybrid::{build_model, HybridModel, ModelSpec, RngState};
use crate::{Error, Result};

pub const FORMAT: &str = "qrecover-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub spec: ModelSpec,
    pub tensors: BTreeMap<String, Vec<f64>>,
    pub epochs_trained: usize,
    pub rng_state: Option<RngState>,
}

impl Checkpoint {
    pub fn capture(model: &HybridModel, epochs_trained: usize, rng_state: Option<RngState>) -> Self {
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            spec: model.spec.clone(),
            tensors: model
                .tensors()
                .into_iter()
                .map(|(name, t)| (name.to_string(), t.to_vec()))
                .collect(),
            epochs_trained,
            rng_state,
        }
    }

    /// Rebuilds the model, checking every tensor against the spec's layout.
    pub fn restore(&self) -> Result<HybridModel> {
        if self.format != FORMAT {
            return Err(Error::Checkpoint(format!("unknown format `{}`", self.format)));
        }
        if self.version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", self.version)));
        }
        let mut model = build_model(&self.spec)?;
        let layout = self.spec.tensor_layout()?;
        if self.tensors.len() != layout.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                layout.len(),
                self.tensors.len()
            )));
        }
        for ((name, len), slot) in layout.into_iter().zip(model.tensors_mut()) {
            let values = self
                .tensors
                .get(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor `{name}`")))?;
            if values.len() != len {
                return Err(Error::Checkpoint(format!(
                    "tensor `{name}` has {} values, expected {len}",
                    values.len()
                )));
            }
            slot.copy_from_slice(values);
        }
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Checkpoint::from_json(&fs::read_to_string(path)?)
    }
}
