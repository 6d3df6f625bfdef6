//! Run manifest: version, config hash, input checksums and the list of
//! files a stage wrote. Everything except the timestamps is reproducible.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub command: String,
    pub config_hash: String,
    pub inputs: Vec<InputChecksum>,
    pub outputs: Vec<String>,
    pub started_at: String,
    pub finished_at: String,
}

#[derive(Debug, Serialize)]
pub struct InputChecksum {
    pub path: String,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub fn checksum_file(path: &Path) -> Result<InputChecksum, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    Ok(InputChecksum {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

pub struct ManifestBuilder {
    command: String,
    config_hash: String,
    inputs: Vec<InputChecksum>,
    outputs: Vec<String>,
    started_at: String,
}

impl ManifestBuilder {
    pub fn new(command: &str, canonical_config: &str) -> Self {
        Self {
            command: command.to_string(),
            config_hash: sha256_hex(canonical_config.as_bytes()),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_at: chrono::Utc::now().to_rfc3339(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        self.inputs.push(checksum_file(path)?);
        Ok(())
    }

    pub fn output(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    /// Writes `run_manifest.json` into the output directory.
    pub fn write(self, out_dir: &Path) -> Result<(), CliError> {
        let manifest = RunManifest {
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command,
            config_hash: self.config_hash,
            inputs: self.inputs,
            outputs: self.outputs,
            started_at: self.started_at,
            finished_at: chrono::Utc::now().to_rfc3339(),
        };
        let path = out_dir.join("run_manifest.json");
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::config(format!("manifest serialization failed: {e}")))?;
        std::fs::write(&path, text)
            .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
    }
}
