//! Run manifest written next to every command's outputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    /// Config file path, or `None` when running on defaults.
    pub config_path: Option<String>,
    /// Hash of the config text; the defaults hash as the empty string.
    pub config_sha256: String,
    pub seed: u64,
    pub inputs: Vec<FileEntry>,
    /// Output file names relative to the output directory.
    pub outputs: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

/// Accumulates inputs and outputs of one command run.
#[derive(Debug)]
pub struct Recorder {
    out_dir: PathBuf,
    manifest: RunManifest,
}

impl Recorder {
    pub fn new(
        command: &str,
        out_dir: &Path,
        config_path: Option<&Path>,
        config_text: &str,
        seed: u64,
    ) -> Self {
        Recorder {
            out_dir: out_dir.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                config_path: config_path.map(|p| p.display().to_string()),
                config_sha256: sha256_hex(config_text.as_bytes()),
                seed,
                inputs: Vec::new(),
                outputs: Vec::new(),
            },
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let sha256 = hash_file(path)?;
        self.manifest.inputs.push(FileEntry {
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }

    /// Writes `contents` to `name` inside the output directory.
    pub fn output(&mut self, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.out_dir.join(name);
        fs::write(&path, contents)
            .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
        self.manifest.outputs.push(FileEntry {
            path: name.to_string(),
            sha256: sha256_hex(contents),
        });
        Ok(path)
    }

    pub fn finish(mut self) -> Result<RunManifest, CliError> {
        self.manifest.outputs.sort_by(|a, b| a.path.cmp(&b.path));
        let text = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| CliError::input(format!("manifest: {e}")))?;
        let path = self.out_dir.join(MANIFEST_NAME);
        fs::write(&path, text + "\n")
            .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
        Ok(self.manifest)
    }
}

/// Re-hashes every listed output under `out_dir` and compares.
#[cfg(test)]
pub fn verify(out_dir: &Path) -> Result<bool, CliError> {
    let text = fs::read_to_string(out_dir.join(MANIFEST_NAME))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).map_err(|e| CliError::input(format!("manifest: {e}")))?;
    for entry in &manifest.outputs {
        if hash_file(&out_dir.join(&entry.path))? != entry.sha256 {
            return Ok(false);
        }
    }
    Ok(true)
}
