use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    /// Written before any computation; a manifest left in this state marks
    /// the directory's other files as partial.
    Incomplete,
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub status: Status,
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub seed: u64,
    pub threads: usize,
    pub config: RunConfig,
    pub outputs: Vec<OutputFile>,
    /// Units of every column and field, keyed `file:column`.
    pub units: BTreeMap<String, String>,
    pub timing: Vec<StageTiming>,
    pub wall_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Manifest {
    pub fn new(config: &RunConfig) -> Self {
        Self {
            status: Status::Incomplete,
            tool: "qwalk".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            experiment: config.experiment.name().into(),
            seed: config.seed,
            threads: config.threads,
            config: config.clone(),
            outputs: Vec::new(),
            units: BTreeMap::new(),
            timing: Vec::new(),
            wall_seconds: 0.0,
            error: None,
        }
    }

    pub fn write(&self, dir: &Path) -> io::Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> io::Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(io::Error::other)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Write `bytes` to `dir/name` and describe the result.
pub fn write_output(dir: &Path, name: &str, bytes: &[u8]) -> io::Result<OutputFile> {
    fs::write(dir.join(name), bytes)?;
    Ok(OutputFile {
        path: name.into(),
        bytes: bytes.len() as u64,
        sha256: sha256_hex(bytes),
    })
}
