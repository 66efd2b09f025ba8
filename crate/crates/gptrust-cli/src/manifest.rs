//! Run manifests. Every command writes a `manifest.json` into its output
//! directory recording the tool version, the command, the fully resolved
//! configuration, a digest of any model file it wrote, and the list of
//! output files. Feeding the manifest back via `--config` reproduces the
//! run, because the recorded configuration is the resolved one.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

use crate::error::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_digest: Option<String>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: BTreeMap<String, String>) -> Self {
        RunManifest {
            tool: "gptrust",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config,
            model_digest: None,
            outputs: Vec::new(),
        }
    }

    /// Serializes the manifest, listing itself as the final output.
    pub fn render(&mut self) -> Result<String, CliError> {
        self.outputs.push(MANIFEST_NAME.to_string());
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Io(format!("manifest: {e}")))?;
        Ok(text + "\n")
    }
}

/// Hex-encoded SHA-256 of a written file, prefixed with the algorithm name.
pub fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Io(format!("digest {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("sha256:{:x}", hasher.finalize()))
}
