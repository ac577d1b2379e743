use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::alloop::{AnnotationRates, HistoryRow};
use crate::eval::Prf;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to interpret and replay one command invocation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub command: String,
    /// Resolved configuration in `key = value` form.
    pub config: String,
    /// SHA-256 of every input file, keyed by role.
    pub inputs: BTreeMap<String, String>,
    /// Cache keys of the artifacts used.
    pub artifacts: BTreeMap<String, String>,
    pub letters: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supervised: Option<Prf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_f1: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<HistoryRow>,
    /// The history exactly as written to CSV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history_csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<AnnotationRates>,
    /// Seconds per stage.
    pub timings: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str) -> Manifest {
        Manifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            ..Manifest::default()
        }
    }

    pub fn test_hash(&self) -> Option<&str> {
        self.inputs.get("test").map(String::as_str)
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Manifest, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: invalid manifest: {e}", path.display())))
    }
}
