use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{Determinism, Mode, RunConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    /// Grid points per real axis.
    pub dims: Vec<usize>,
    pub interior_nodes: usize,
    pub h: f64,
    pub version: String,
    pub threads: usize,
    pub determinism: Determinism,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub schema_version: u32,
    pub mode: Mode,
    pub config: RunConfig,
    /// Every numeric result at full precision.
    pub scalars: BTreeMap<String, f64>,
    pub flags: BTreeMap<String, bool>,
    pub labels: BTreeMap<String, String>,
    pub provenance: Provenance,
    /// Kept apart from `scalars` so that reruns compare bitwise.
    pub wall_time_s: f64,
    pub heuristic_domain: bool,
    pub messages: Vec<String>,
}

impl RunReport {
    pub fn new(config: &RunConfig, provenance: Provenance, heuristic_domain: bool) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            mode: config.problem.mode,
            config: config.clone(),
            scalars: BTreeMap::new(),
            flags: BTreeMap::new(),
            labels: BTreeMap::new(),
            provenance,
            wall_time_s: 0.0,
            heuristic_domain,
            messages: Vec::new(),
        }
    }

    /// Non-finite values have no JSON representation and go to `messages`.
    pub fn scalar(&mut self, key: &str, value: f64) {
        if value.is_finite() {
            self.scalars.insert(key.to_string(), value);
        } else {
            self.messages.push(format!("{key} is not finite ({value})"));
        }
    }

    pub fn flag(&mut self, key: &str, value: bool) {
        self.flags.insert(key.to_string(), value);
    }

    pub fn label(&mut self, key: &str, value: impl Into<String>) {
        self.labels.insert(key.to_string(), value.into());
    }

    pub fn read(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("invalid report {}: {e}", path.display()))
    }

    pub fn write(&self, path: &Path) -> Result<(), String> {
        let text = serde_json::to_string_pretty(self).map_err(|e| e.to_string())?;
        std::fs::write(path, text + "\n").map_err(|e| format!("cannot write {}: {e}", path.display()))
    }
}
