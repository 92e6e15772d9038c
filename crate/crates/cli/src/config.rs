use std::path::{Path, PathBuf};

use mhessian::bifurcation::{ContinuationOptions, PsiFamily};
use mhessian::eigen::LambdaPolicy;
use mhessian::{DomainKind, SolverConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Dirichlet,
    Eigen,
    Bounds,
    Bifurcate,
    Radial,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Determinism {
    #[default]
    Exact,
    Fast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethodChoice {
    #[default]
    InverseIteration,
    ContinuityPath,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub params: Vec<f64>,
    pub n: usize,
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
}

/// A positive function of the real coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    Constant { value: f64 },
    /// `c0 + grad . x`.
    Affine { c0: f64, grad: Vec<f64> },
    /// `a + b |x|^2`.
    Radial { a: f64, b: f64 },
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec::Constant { value: 1.0 }
    }
}

impl WeightSpec {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            WeightSpec::Constant { value } => *value,
            WeightSpec::Affine { c0, grad } => c0 + grad.iter().zip(x).map(|(g, x)| g * x).sum::<f64>(),
            WeightSpec::Radial { a, b } => a + b * x.iter().map(|v| v * v).sum::<f64>(),
        }
    }

    pub fn is_one(&self) -> bool {
        matches!(self, WeightSpec::Constant { value } if *value == 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub mode: Mode,
    pub m: usize,
    /// Eigenvalue weight `f`.
    #[serde(default)]
    pub f: WeightSpec,
    /// Dirichlet right-hand side `h` (dirichlet mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rhs: Option<WeightSpec>,
    #[serde(default)]
    pub method: EigenMethodChoice,
    /// Right-hand side family (bifurcate mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<PsiFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma0: Option<f64>,
    /// Known first eigenvalue (bifurcate) or the value to check (verify).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda1: Option<f64>,
    /// Number of randomized starts for the uniqueness probes; 0 skips them.
    #[serde(default)]
    pub uniqueness_starts: usize,
    #[serde(default)]
    pub seed: u64,
    /// Relative bracket width of the radial shooter.
    #[serde(default = "default_radial_tol")]
    pub radial_tol: f64,
    /// Relative tolerance of verify mode on `lambda1`.
    #[serde(default = "default_verify_tol")]
    pub verify_tol: f64,
}

fn default_radial_tol() -> f64 {
    1e-10
}

fn default_verify_tol() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radial_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub path_policy: LambdaPolicy,
    #[serde(default)]
    pub continuation: ContinuationOptions,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub determinism: Determinism,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
    }

    /// Checks everything that can be checked without solving.
    pub fn validate(&self) -> Result<(), String> {
        let d = &self.domain;
        let p = &self.problem;
        if !(1..=2).contains(&d.n) {
            return Err(format!("config: unsupported complex dimension n = {} (need 1 ≤ n ≤ 2)", d.n));
        }
        if p.m < 1 || p.m > d.n {
            return Err(format!("config: m = {} violates 1 ≤ m ≤ n (n = {})", p.m, d.n));
        }
        if !(d.h > 0.0) {
            return Err(format!("config: grid spacing h must be positive, got {}", d.h));
        }
        if let Some(t) = self.threads {
            if t == 0 {
                return Err("config: threads must be at least 1".into());
            }
        }
        for (name, w) in [("f", Some(&p.f)), ("rhs", p.rhs.as_ref())] {
            if let Some(WeightSpec::Affine { grad, .. }) = w {
                if grad.len() != 2 * d.n {
                    return Err(format!("config: {name}.grad needs {} entries", 2 * d.n));
                }
            }
        }
        self.solver.validate().map_err(|e| e.to_string())?;
        match p.mode {
            Mode::Dirichlet if p.rhs.is_none() => return Err("config: dirichlet mode needs problem.rhs".into()),
            Mode::Bifurcate => {
                let psi = p.psi.as_ref().ok_or("config: bifurcate mode needs problem.psi")?;
                psi.validate().map_err(|e| e.to_string())?;
                if p.gamma0.is_none() {
                    return Err("config: bifurcate mode needs problem.gamma0".into());
                }
            }
            Mode::Radial if d.kind != DomainKind::Ball => {
                return Err("config: radial mode needs a ball domain".into());
            }
            Mode::Verify if p.lambda1.is_none() => return Err("config: verify mode needs problem.lambda1".into()),
            _ => {}
        }
        Ok(())
    }
}
