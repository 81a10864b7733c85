//! Run manifests: a JSON sidecar `<artifact>.manifest.json` next to every
//! output, recording the configuration and the checksums of inputs and
//! outputs.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliResult;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileChecksum {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub stage: String,
    pub config: Value,
    pub inputs: Vec<FileChecksum>,
    pub outputs: Vec<FileChecksum>,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    /// Hash over stage, config and input checksums. Identical runs share it.
    pub manifest_hash: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn file_checksum(path: &Path) -> CliResult<FileChecksum> {
    let bytes = std::fs::read(path)?;
    Ok(FileChecksum {
        path: path.to_path_buf(),
        sha256: sha256_hex(&bytes),
    })
}

pub fn sidecar_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    artifact.with_file_name(name)
}

/// Collects inputs at construction and writes sidecars for every output.
pub struct ManifestBuilder {
    stage: String,
    config: Value,
    inputs: Vec<FileChecksum>,
    started_at: DateTime<Utc>,
}

impl ManifestBuilder {
    pub fn new(stage: &str, config: Value, inputs: &[&Path]) -> CliResult<Self> {
        Ok(ManifestBuilder {
            stage: stage.to_string(),
            config,
            inputs: inputs
                .iter()
                .map(|p| file_checksum(p))
                .collect::<CliResult<_>>()?,
            started_at: Utc::now(),
        })
    }

    pub fn hash(&self) -> String {
        let canonical = serde_json::json!({
            "stage": self.stage,
            "config": self.config,
            "inputs": self.inputs.iter().map(|c| &c.sha256).collect::<Vec<_>>(),
        });
        sha256_hex(canonical.to_string().as_bytes())
    }

    pub fn finish(self, outputs: &[&Path]) -> CliResult<RunManifest> {
        let outputs: Vec<FileChecksum> = outputs
            .iter()
            .map(|p| file_checksum(p))
            .collect::<CliResult<_>>()?;
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            manifest_hash: self.hash(),
            stage: self.stage,
            config: self.config,
            inputs: self.inputs,
            outputs: outputs.clone(),
            started_at: self.started_at,
            finished_at: Utc::now(),
        };
        for out in &outputs {
            let text = serde_json::to_string_pretty(&manifest)?;
            std::fs::write(sidecar_path(&out.path), text + "\n")?;
        }
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_naming() {
        assert_eq!(
            sidecar_path(Path::new("out/candidates.jsonl")),
            PathBuf::from("out/candidates.jsonl.manifest.json")
        );
    }

    #[test]
    fn hash_ignores_time_but_not_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        std::fs::write(&input, "a").unwrap();
        let a = ManifestBuilder::new("vocab", serde_json::json!({"n": 1}), &[&input]).unwrap();
        let b = ManifestBuilder::new("vocab", serde_json::json!({"n": 1}), &[&input]).unwrap();
        assert_eq!(a.hash(), b.hash());
        std::fs::write(&input, "b").unwrap();
        let c = ManifestBuilder::new("vocab", serde_json::json!({"n": 1}), &[&input]).unwrap();
        assert_ne!(a.hash(), c.hash());
    }
}
