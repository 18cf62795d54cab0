use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::sha256_hex;

pub const MANIFEST: &str = "manifest.json";

/// One numerical verdict of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value <= threshold`.
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            pass: value <= threshold,
        }
    }

    pub fn flag(name: impl Into<String>, pass: bool) -> Self {
        Self {
            name: name.into(),
            value: if pass { 1.0 } else { 0.0 },
            threshold: 1.0,
            pass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    CheckFailed,
    Divergence,
    Error,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::CheckFailed | Status::Error => 1,
            Status::Divergence => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub wall_clock_seconds: f64,
    pub checks: Vec<Check>,
    /// `sha256` of every output file, by name.
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("cannot read {0}: {1}")]
    Io(String, std::io::Error),
    #[error("cannot parse {0}: {1}")]
    Parse(String, serde_json::Error),
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self, ManifestError> {
        let path = dir.join(MANIFEST);
        let bytes = std::fs::read(&path).map_err(|e| ManifestError::Io(path.display().to_string(), e))?;
        serde_json::from_slice(&bytes).map_err(|e| ManifestError::Parse(path.display().to_string(), e))
    }

    /// Files under `dir` whose content no longer matches the recorded hash.
    pub fn altered_files(&self, dir: &Path) -> Vec<String> {
        self.files
            .iter()
            .filter(|(name, hash)| std::fs::read(dir.join(name)).map_or(true, |b| sha256_hex(&b) != **hash))
            .map(|(name, _)| name.clone())
            .collect()
    }
}
