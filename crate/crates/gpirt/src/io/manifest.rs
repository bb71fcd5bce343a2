//! Run manifests: enough provenance to reproduce an artifact bitwise.
//! Deliberately free of timestamps so manifests themselves reproduce.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{GpirtError, Result};
use crate::model::GpirtConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: GpirtConfig,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest.iter() {
        use std::fmt::Write;
        let _ = write!(out, "{byte:02x}");
    }
    Ok(out)
}

pub fn digest(path: &Path) -> Result<FileDigest> {
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: sha256_file(path)?,
    })
}

impl RunManifest {
    pub fn new(command: &str, config: &GpirtConfig) -> Self {
        RunManifest {
            tool: "gpirt".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed: config.seed,
            config: config.clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn with_input(mut self, path: &Path) -> Result<Self> {
        self.inputs.push(digest(path)?);
        Ok(self)
    }

    pub fn with_output(mut self, path: &Path) -> Result<Self> {
        self.outputs.push(digest(path)?);
        Ok(self)
    }

    /// Write alongside an artifact as `<artifact>.manifest.json`.
    pub fn write_for(&self, artifact: &Path) -> Result<std::path::PathBuf> {
        let mut path = artifact.as_os_str().to_owned();
        path.push(".manifest.json");
        let path = std::path::PathBuf::from(path);
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| GpirtError::Format(e.to_string()))?;
        std::fs::write(&path, json)?;
        Ok(path)
    }
}
