//! Single-file checkpoint: `PYROCKPT`, u64 LE header length, JSON header,
//! safetensors weights.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, TrainingConfig};
use super::network::Classifier;
use crate::error::{Error, Result};
use crate::labels::LabelScheme;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PYROCKPT";
pub const CHECKPOINT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u64,
    pub model_config: ModelConfig,
    pub training_config: TrainingConfig,
    pub classes: Vec<String>,
    pub label_scheme: LabelScheme,
    pub epoch: usize,
    pub val_accuracy: f64,
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
}

pub fn checkpoint_bytes(header: &CheckpointHeader, model: &Classifier) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(header)?;
    let weights = model.weights_bytes()?;
    let mut out = Vec::with_capacity(16 + json.len() + weights.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&weights);
    Ok(out)
}

pub fn save_checkpoint(path: &Path, header: &CheckpointHeader, model: &Classifier) -> Result<()> {
    crate::fsutil::write_atomic(path, &checkpoint_bytes(header, model)?)
}

fn split(path: &Path, bytes: &[u8]) -> Result<(CheckpointHeader, usize)> {
    let corrupt = |m: &str| Error::Schema(format!("{}: {m}", path.display()));
    if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(corrupt("not a checkpoint file"));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let end = 16usize.checked_add(len).filter(|&e| e <= bytes.len()).ok_or_else(|| corrupt("truncated header"))?;
    let value: serde_json::Value = serde_json::from_slice(&bytes[16..end])?;
    let found = value.get("format_version").and_then(|v| v.as_u64()).ok_or_else(|| corrupt("missing format_version"))?;
    if found != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            found,
            expected: CHECKPOINT_VERSION,
        });
    }
    let header: CheckpointHeader = serde_json::from_value(value).map_err(|e| corrupt(&e.to_string()))?;
    if header.classes.len() != header.model_config.num_classes {
        return Err(corrupt("class list length differs from num_classes"));
    }
    Ok((header, end))
}

pub fn read_checkpoint_header(path: &Path) -> Result<CheckpointHeader> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(split(path, &bytes)?.0)
}

/// Rebuilds the network and restores its weights without touching any
/// pretrained weight file.
pub fn load_checkpoint(path: &Path) -> Result<(CheckpointHeader, Classifier)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (header, offset) = split(path, &bytes)?;
    let model = Classifier::random(&header.model_config, 0)?;
    let tensors = candle_core::safetensors::load_buffer(&bytes[offset..], model.device())?;
    model.load_weights(&tensors)?;
    Ok((header, model))
}
