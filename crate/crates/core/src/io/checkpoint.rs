use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recon::{ReconConfig, ReconEpochMetrics, ReconPair};
use crate::rib::{EpochMetrics, RibConfig, TransceiverPair};

pub const CHECKPOINT_VERSION: u64 = 1;

/// Trained pairs with the configuration and metrics that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case", deny_unknown_fields)]
pub enum Payload {
    Classification { config: RibConfig, pairs: Vec<TransceiverPair>, metrics: Vec<EpochMetrics> },
    Reconstruction { config: ReconConfig, pairs: Vec<ReconPair>, metrics: Vec<ReconEpochMetrics> },
}

impl Payload {
    pub fn task_name(&self) -> &'static str {
        match self {
            Payload::Classification { .. } => "classification",
            Payload::Reconstruction { .. } => "reconstruction",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u64,
    pub seed: u64,
    pub epochs: usize,
    pub payload: Payload,
}

impl Checkpoint {
    pub fn new(payload: Payload) -> Self {
        let (seed, epochs) = match &payload {
            Payload::Classification { config, .. } => (config.seed, config.epochs),
            Payload::Reconstruction { config, .. } => (config.seed, config.epochs),
        };
        Checkpoint { format_version: CHECKPOINT_VERSION, seed, epochs, payload }
    }

    fn validate(&self) -> Result<()> {
        match &self.payload {
            Payload::Classification { pairs, .. } => pairs.iter().try_for_each(TransceiverPair::validate),
            Payload::Reconstruction { pairs, .. } => pairs.iter().try_for_each(ReconPair::validate),
        }
    }
}

/// Pretty JSON; floats are written in shortest round-trip form, so a
/// load returns bit-identical parameters.
pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    ckpt.validate()?;
    let mut text = serde_json::to_string_pretty(ckpt)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// The version is checked before the schema, so a future file reports a
/// version error rather than a field error.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let version = value
        .get("format_version")
        .ok_or_else(|| Error::Schema("missing format_version".into()))?
        .as_u64()
        .ok_or_else(|| Error::Schema("format_version must be an unsigned integer".into()))?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version { found: version, expected: CHECKPOINT_VERSION });
    }
    let ckpt: Checkpoint = serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
    ckpt.validate().map_err(|e| Error::Schema(e.to_string()))?;
    Ok(ckpt)
}
