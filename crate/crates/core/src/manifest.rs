//! Run manifests: every CLI command writes one JSON manifest recording
//! the fully resolved configuration and all input/output paths, so any
//! run can be reproduced exactly from its manifest alone.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{GaitError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    /// Command-specific resolved parameters (every flag and config file
    /// value folded in); `rerun` re-executes from this block alone.
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    /// Informational only — the single field that varies across
    /// otherwise identical runs.
    pub duration_seconds: f64,
}

impl RunManifest {
    pub fn new<C: Serialize>(command: &str, seed: u64, config: &C) -> Result<RunManifest> {
        Ok(RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config: serde_json::to_value(config)
                .map_err(|e| GaitError::Config(format!("manifest config: {e}")))?,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            duration_seconds: 0.0,
        })
    }

    pub fn input(mut self, name: &str, path: &Path) -> Self {
        self.inputs.insert(name.to_string(), path.display().to_string());
        self
    }

    pub fn output(mut self, name: &str, path: &Path) -> Self {
        self.outputs.insert(name.to_string(), path.display().to_string());
        self
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut json = serde_json::to_string_pretty(self)
            .map_err(|e| GaitError::Config(format!("manifest serialize: {e}")))?;
        json.push('\n');
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RunManifest> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| GaitError::Data(format!("manifest parse: {e}")))
    }
}

/// Manifests live next to the command's primary output.
pub fn manifest_path(primary_output: &Path) -> PathBuf {
    let mut name = primary_output
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    name.push_str(".manifest.json");
    primary_output.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trips() {
        let m = RunManifest::new("train", 7, &serde_json::json!({"epochs": 3}))
            .unwrap()
            .input("dataset", Path::new("data.jsonl"))
            .output("checkpoint", Path::new("model.ckpt"));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        m.save(&path).unwrap();
        let back = RunManifest::load(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.inputs["dataset"], "data.jsonl");
    }

    #[test]
    fn manifest_path_appends_suffix() {
        assert_eq!(
            manifest_path(Path::new("runs/model.ckpt")),
            PathBuf::from("runs/model.ckpt.manifest.json")
        );
        assert_eq!(
            manifest_path(Path::new("loss.csv")),
            PathBuf::from("loss.csv.manifest.json")
        );
    }
}
