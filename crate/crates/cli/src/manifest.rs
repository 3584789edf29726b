//! Run manifests and content hashing.
//!
//! Every command writes `manifest.json` next to its outputs. Together with
//! the embedded configuration and seed it is enough to regenerate the data
//! files byte for byte; passing a manifest back as `--config` reruns it.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const TOOL: &str = "nvpd";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub config_sha256: String,
    /// Effective configuration after presets and `--seed` overrides.
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub warnings: Vec<String>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

/// Collects the files written by one command.
pub struct OutputDir {
    dir: PathBuf,
    command: String,
    config: serde_json::Value,
    seed: Option<u64>,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    warnings: Vec<String>,
    started: u64,
}

impl OutputDir {
    pub fn create(dir: &Path, command: &str, config: serde_json::Value, seed: Option<u64>) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            config,
            seed,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            warnings: Vec::new(),
            started: unix_now(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn record_input(&mut self, name: &str, bytes: &[u8]) {
        self.inputs.insert(name.to_string(), sha256_hex(bytes));
    }

    pub fn inputs(&self) -> &BTreeMap<String, String> {
        &self.inputs
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        log::warn!("{msg}");
        if !self.warnings.contains(&msg) {
            self.warnings.push(msg);
        }
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.outputs.insert(name.to_string(), sha256_hex(bytes));
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("serialisable value");
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn config_sha256(&self) -> String {
        sha256_hex(&canonical_bytes(&self.config))
    }

    /// Writes `manifest.json` and returns it.
    pub fn finish(self) -> Result<Manifest> {
        let manifest = Manifest {
            tool: TOOL.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command.clone(),
            config_sha256: self.config_sha256(),
            config: self.config.clone(),
            seed: self.seed,
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
            warnings: self.warnings.clone(),
            started_unix: self.started,
            finished_unix: unix_now(),
        };
        let path = self.dir.join("manifest.json");
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("serialisable manifest");
        bytes.push(b'\n');
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}

/// Compact JSON with keys in sorted order (serde_json maps are ordered).
pub fn canonical_bytes(value: &serde_json::Value) -> Vec<u8> {
    serde_json::to_vec(value).expect("JSON value")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn manifest_lists_outputs() {
        let tmp = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(tmp.path(), "test", serde_json::json!({"b": 1, "a": 2}), Some(3)).unwrap();
        out.write("x.csv", b"a,b\n").unwrap();
        out.warn("careful");
        out.warn("careful");
        let m = out.finish().unwrap();
        assert_eq!(m.outputs["x.csv"], sha256_hex(b"a,b\n"));
        assert_eq!(m.warnings, vec!["careful".to_string()]);
        assert_eq!(m.config_sha256, sha256_hex(br#"{"a":2,"b":1}"#));
        let back: Manifest = serde_json::from_slice(&fs::read(tmp.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
