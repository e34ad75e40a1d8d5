//! Run manifests: what was run, on which inputs, and what it produced.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Current manifest schema tag.
pub const MANIFEST_SCHEMA: &str = "cutlab-manifest/1";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest: {0}")]
    Parse(String),
    #[error("manifest: unsupported schema {0:?}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileEntry {
    pub fn of_bytes(path: &str, bytes: &[u8]) -> Self {
        Self { path: path.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 }
    }

    pub fn of_file(path: &str) -> std::io::Result<Self> {
        Ok(Self::of_bytes(path, &std::fs::read(path)?))
    }
}

/// Record of one experiment run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema: String,
    /// Prefix of `input_hash`.
    pub id: String,
    pub command: String,
    /// Effective configuration, as TOML.
    pub config: String,
    /// SHA-256 over the command, the configuration and the input files.
    pub input_hash: String,
    pub inputs: Vec<FileEntry>,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    pub outputs: Vec<FileEntry>,
    /// Set when the run stopped early; the outputs hold the completed part.
    pub partial: Option<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn input_hash(command: &str, config: &str, inputs: &[FileEntry]) -> String {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update([0]);
    h.update(config.as_bytes());
    for f in inputs {
        h.update([0]);
        h.update(f.sha256.as_bytes());
    }
    hex::encode(h.finalize())
}

pub fn now_unix_ms() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

impl Manifest {
    pub fn new(command: &str, config: String, inputs: Vec<FileEntry>, started_unix_ms: u64) -> Self {
        let input_hash = input_hash(command, &config, &inputs);
        Self {
            schema: MANIFEST_SCHEMA.to_string(),
            id: input_hash[..12].to_string(),
            command: command.to_string(),
            config,
            input_hash,
            inputs,
            started_unix_ms,
            finished_unix_ms: started_unix_ms,
            outputs: Vec::new(),
            partial: None,
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ManifestError> {
        let m: Manifest = serde_json::from_slice(bytes).map_err(|e| ManifestError::Parse(e.to_string()))?;
        if m.schema != MANIFEST_SCHEMA {
            return Err(ManifestError::Schema(m.schema));
        }
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn read(path: &Path) -> Result<Self, ManifestError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }
}

/// Manifest path that goes with a main output file.
pub fn manifest_path(out: &str) -> String {
    format!("{out}.manifest.json")
}
