use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sfdma_core::io::BlobSpec;
use sfdma_core::recon::AutoencoderSpec;
use sfdma_core::rib::RibArchitecture;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Inference,
    Reconstruction,
}

/// Where training and evaluation data come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Uncompressed MNIST IDX files in `path`.
    Mnist {
        path: PathBuf,
        #[serde(default)]
        train_limit: Option<usize>,
        #[serde(default)]
        test_limit: Option<usize>,
    },
    /// Gaussian classes; the test split is drawn after the training split.
    Blobs { train: BlobSpec, test_samples: usize },
    /// Smooth synthetic images shaped by the autoencoder spec.
    Gradients { train_count: usize, test_count: usize },
    /// A directory of same-sized PGM/PPM files, split by sorted file name.
    Images { path: PathBuf, test_count: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    pub users: usize,
    /// Block length d; for reconstruction it must equal the autoencoder's
    /// `features × bits_per_feature` when given.
    #[serde(default)]
    pub bits: Option<usize>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub architecture: Option<RibArchitecture>,
    #[serde(default)]
    pub autoencoder: Option<AutoencoderSpec>,
    pub train_snr_db: f64,
    pub powers: Vec<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default = "one")]
    pub noise_samples: usize,
    pub seed: u64,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "yes")]
    pub train_with_interference: bool,
    pub dataset: DatasetSpec,
    pub output_dir: PathBuf,
    /// SNR and trial count used by `eval`, `xdecode` and `ortho`.
    #[serde(default)]
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub snr_db: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub ortho_samples: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { snr_db: None, trials: 1, seed: 0, ortho_samples: 10_000 }
    }
}

fn default_lambda() -> f64 {
    0.05
}

fn default_lr() -> f64 {
    1e-3
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let cfg: ExperimentConfig =
            serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok((cfg, bytes))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, why: &str| Err(CliError::Config(format!("{field}: {why}")));
        if self.users == 0 {
            return bad("users", "must be ≥ 1");
        }
        if self.powers.len() != self.users {
            return bad("powers", "needs one entry per user");
        }
        if self.powers.iter().any(|p| !(*p > 0.0)) {
            return bad("powers", "entries must be positive");
        }
        if self.epochs == 0 || self.batch_size == 0 || self.noise_samples == 0 {
            return bad("epochs/batch_size/noise_samples", "must be ≥ 1");
        }
        if !(self.lambda >= 0.0) {
            return bad("lambda", "must be ≥ 0");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate", "must be positive");
        }
        if !self.train_snr_db.is_finite() {
            return bad("train_snr_db", "must be finite");
        }
        if self.eval.trials == 0 {
            return bad("eval.trials", "must be ≥ 1");
        }
        match (self.task, &self.dataset) {
            (TaskKind::Inference, DatasetSpec::Mnist { path, .. })
            | (TaskKind::Reconstruction, DatasetSpec::Images { path, .. }) => {
                if !path.is_dir() {
                    return bad("dataset.path", &format!("{} is not a directory", path.display()));
                }
            }
            (TaskKind::Inference, DatasetSpec::Blobs { .. })
            | (TaskKind::Reconstruction, DatasetSpec::Gradients { .. }) => {}
            _ => return bad("dataset.kind", "does not match the task"),
        }
        match self.task {
            TaskKind::Inference => {
                if self.bits.unwrap_or(0) == 0 {
                    return bad("bits", "inference needs a block length ≥ 1");
                }
                if self.autoencoder.is_some() {
                    return bad("autoencoder", "only applies to reconstruction");
                }
            }
            TaskKind::Reconstruction => {
                if self.architecture.is_some() {
                    return bad("architecture", "only applies to inference");
                }
                let spec = self.autoencoder_spec();
                spec.validate().map_err(|e| CliError::Config(format!("autoencoder: {e}")))?;
                if self.bits.is_some_and(|b| b != spec.bits()) {
                    return bad("bits", &format!("autoencoder produces {} bits", spec.bits()));
                }
            }
        }
        Ok(())
    }

    pub fn autoencoder_spec(&self) -> AutoencoderSpec {
        self.autoencoder.clone().unwrap_or_else(AutoencoderSpec::desk_rgb16)
    }

    pub fn eval_snr_db(&self) -> f64 {
        self.eval.snr_db.unwrap_or(self.train_snr_db)
    }
}
