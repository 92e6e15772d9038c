use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::report::RunReport;

/// Relative tolerances per scalar key. Keys absent from `keys` use `default`;
/// with no `default` they are not compared.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default)]
    pub default: Option<f64>,
    #[serde(default)]
    pub keys: BTreeMap<String, f64>,
}

impl Tolerances {
    pub fn read(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let tol: Self = serde_json::from_str(&text).map_err(|e| format!("invalid tolerance file {}: {e}", path.display()))?;
        let bad = tol.default.into_iter().chain(tol.keys.values().copied()).find(|t| !(*t >= 0.0));
        match bad {
            Some(t) => Err(format!("tolerances must be >= 0, got {t}")),
            None => Ok(tol),
        }
    }

    pub fn for_key(&self, key: &str) -> Option<f64> {
        self.keys.get(key).copied().or(self.default)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub key: String,
    pub a: f64,
    pub b: f64,
    pub rel: f64,
    pub tol: f64,
}

#[derive(Debug)]
pub enum CompareError {
    /// Reports describe different problems.
    KeyMismatch(String),
    Differ(Vec<Mismatch>),
}

/// `|a - b| / max(|a|, |b|)`, 0 when both vanish.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Checks mode, domain kind, parameters, `n` and `m`; the grid spacing may differ.
pub fn compare_reports(a: &RunReport, b: &RunReport, tol: &Tolerances) -> Result<usize, CompareError> {
    let (da, db) = (&a.config.domain, &b.config.domain);
    let checks = [
        ("mode", a.mode == b.mode),
        ("domain.kind", da.kind == db.kind),
        ("domain.params", da.params == db.params),
        ("domain.n", da.n == db.n),
        ("domain.center", da.center == db.center),
        ("problem.m", a.config.problem.m == b.config.problem.m),
    ];
    if let Some((key, _)) = checks.iter().find(|(_, ok)| !ok) {
        return Err(CompareError::KeyMismatch(format!("reports differ in {key}")));
    }
    for key in tol.keys.keys() {
        if !a.scalars.contains_key(key) || !b.scalars.contains_key(key) {
            return Err(CompareError::KeyMismatch(format!("scalar {key} missing from a report")));
        }
    }
    let mut compared = 0;
    let mut bad = Vec::new();
    for (key, &va) in &a.scalars {
        let (Some(&vb), Some(t)) = (b.scalars.get(key), tol.for_key(key)) else {
            continue;
        };
        compared += 1;
        let rel = rel_diff(va, vb);
        if rel > t {
            bad.push(Mismatch { key: key.clone(), a: va, b: vb, rel, tol: t });
        }
    }
    if bad.is_empty() {
        Ok(compared)
    } else {
        Err(CompareError::Differ(bad))
    }
}
