//! Reproducibility log written by every subcommand: materialized config, seed and SHA-256 hashes
//! of inputs and outputs. Paths are recorded relative to the output location so two runs into
//! different directories log identical bytes.

use std::path::Path;

use radsynth_core::config::PipelineConfig;
use radsynth_core::Error;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileHash {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

pub fn hash_file(path: &Path, name: impl Into<String>) -> Result<FileHash, Error> {
    let data = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(FileHash {
        name: name.into(),
        bytes: data.len() as u64,
        sha256: hex::encode(Sha256::digest(&data)),
    })
}

/// Hash recorded under the file's own name.
pub fn hash_named(path: &Path) -> Result<FileHash, Error> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    hash_file(path, name)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunLog {
    pub command: String,
    pub seed: u64,
    pub config: PipelineConfig,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub summary: serde_json::Value,
}

impl RunLog {
    pub fn new(command: &str, cfg: &PipelineConfig) -> Self {
        Self {
            command: command.to_string(),
            seed: cfg.seed,
            config: cfg.clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            summary: serde_json::Value::Null,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_default() + "\n"
    }
}
