//! Per-run manifests: what went in, what came out, and how long it took.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::run::FilterCounts;
use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

impl FileRecord {
    pub fn of(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Ok(FileRecord {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceRecord {
    pub name: String,
    pub origin: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonRecord {
    pub start: String,
    pub weeks: u32,
}

/// One manifest per run. Everything except `timings_ms` is a function of
/// the inputs, so two runs with the same inputs differ only there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<FileRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<String>,
    pub inputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub resources: Vec<ResourceRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub season: Option<SeasonRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<FilterCounts>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub outputs: BTreeMap<String, String>,
    pub timings_ms: BTreeMap<String, u64>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            tool: format!("flutrack {}", env!("CARGO_PKG_VERSION")),
            command: command.to_string(),
            config: None,
            pipeline: None,
            inputs: Vec::new(),
            resources: Vec::new(),
            season: None,
            counts: None,
            parameters: BTreeMap::new(),
            outputs: BTreeMap::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    pub fn output(&mut self, name: &str, path: &Path) {
        self.outputs.insert(name.to_string(), path.display().to_string());
    }

    pub fn param(&mut self, name: &str, value: impl Serialize) {
        self.parameters
            .insert(name.to_string(), serde_json::to_value(value).expect("serializable parameter"));
    }

    pub fn time(&mut self, name: &str, started: std::time::Instant) {
        self.timings_ms
            .insert(name.to_string(), started.elapsed().as_millis() as u64);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_json()).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: bad manifest: {e}", path.display())))
    }

    /// The manifest with timings cleared, for comparing runs.
    pub fn without_timings(&self) -> Self {
        RunManifest {
            timings_ms: BTreeMap::new(),
            ..self.clone()
        }
    }
}
