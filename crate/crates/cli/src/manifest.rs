use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::args::Command;

/// Everything needed to rerun a command: the fully resolved invocation plus
/// the files it touched and values it derived along the way.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub invocation: Command,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub derived: serde_json::Value,
}

impl RunManifest {
    pub fn new(invocation: &Command) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: invocation.name().to_string(),
            invocation: invocation.clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            derived: serde_json::Value::Null,
        }
    }

    /// Manifest location for a primary output file.
    pub fn path_for(output: &Path) -> PathBuf {
        let mut s = output.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    }

    pub fn write_beside(&self, primary: &Path) -> anyhow::Result<PathBuf> {
        let path = Self::path_for(primary);
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
