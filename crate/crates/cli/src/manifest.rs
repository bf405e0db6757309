use std::path::Path;

use serde::Serialize;
use sfdma_core::io::CHECKPOINT_VERSION;
use sfdma_core::nncore::RNG_ALGORITHM;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Serialize)]
pub struct Versions {
    pub sfdma: &'static str,
    pub checkpoint_format: u64,
    pub rng: &'static str,
}

/// What is needed to rerun a command: the hashed inputs, the seed and the
/// options that shaped the outputs. Nothing time- or host-dependent.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: &'static str,
    /// `(name, sha256)` of every input file, in argument order.
    pub inputs: Vec<(String, String)>,
    pub seed: Option<u64>,
    pub options: serde_json::Value,
    pub outputs: Vec<String>,
    pub versions: Versions,
}

impl Manifest {
    pub fn new(command: &'static str) -> Self {
        Manifest {
            command,
            inputs: Vec::new(),
            seed: None,
            options: serde_json::Value::Null,
            outputs: Vec::new(),
            versions: Versions {
                sfdma: env!("CARGO_PKG_VERSION"),
                checkpoint_format: CHECKPOINT_VERSION,
                rng: RNG_ALGORITHM,
            },
        }
    }

    pub fn input(&mut self, name: &str, bytes: &[u8]) {
        self.inputs.push((name.to_owned(), sha256_hex(bytes)));
    }

    pub fn input_file(&mut self, name: &str, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path)?;
        self.input(name, &bytes);
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(dir.join(format!("{}_manifest.json", self.command.replace('-', "_"))), text)?;
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
