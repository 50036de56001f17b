use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Record of one run: what produced it and a digest of every output file.
/// Holds no timestamps or absolute paths, so identical runs write identical
/// manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    /// The config file exactly as read.
    pub config: String,
    pub seed: Option<u64>,
    pub stages: Vec<String>,
    pub counts: BTreeMap<String, u64>,
    /// Outputs that were not produced, with the reason.
    pub skipped: BTreeMap<String, String>,
    /// File name to SHA-256 of its contents.
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(config_text: &str, seed: Option<u64>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: sha256_hex(config_text.as_bytes()),
            config: config_text.to_string(),
            seed,
            stages: Vec::new(),
            counts: BTreeMap::new(),
            skipped: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    /// Hashes `dir/name` into the output list.
    pub fn record(&mut self, dir: &Path, name: &str) -> Result<(), CliError> {
        let path = dir.join(name);
        let bytes = std::fs::read(&path).map_err(|e| CliError::Io {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        self.outputs.insert(name.to_string(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        std::fs::write(path, text).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}
