//! First eigenpair of `sigma_m(u) = C(n, m) (-lambda u f)^m`, `u = 0` on the
//! boundary, `min u = -1`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dirichlet::{check_m, seed_profile, sigma_values, solve_sigma_m, SolverConfig};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::functionals::rayleigh;
use crate::geometry::Grid;
use crate::hessian::{binomial, cone_slack, hessian_at, spectrum};
use crate::linalg::LinearSolver;
use crate::newton::{self, FixedTarget, Target};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    ContinuityPath,
    InverseIteration,
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub lambda1: f64,
    /// Normalized eigenfunction, `min u1 = -1`, zero off the interior.
    pub u1: ScalarField,
    /// `(lambda, sup |u_lambda|)` along the path, or `(lambda_k, sup |w_k|)`
    /// per inverse-iteration step.
    pub path: Vec<(f64, f64)>,
    /// `sup |sigma_m(u1) - C(n, m) (-lambda1 u1 f)^m|`.
    pub residual: f64,
    pub iterations: usize,
    pub newton_iterations: usize,
    pub method: EigenMethod,
    /// Extrapolation error bar of the path estimate; 0 for inverse iteration.
    pub lambda_error: f64,
    /// `sup |u_lambda|` at the path terminus over its value at `0.9 lambda1`.
    pub blowup_ratio: Option<f64>,
}

/// Step control of [`continuity_path`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LambdaPolicy {
    /// Fraction of the distance to the extrapolated blow-up point taken per step.
    pub approach: f64,
    /// Smallest admissible lambda step.
    pub min_step: f64,
}

impl Default for LambdaPolicy {
    fn default() -> Self {
        Self {
            approach: 0.5,
            min_step: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenDiagnostics {
    pub equation_residual: f64,
    pub normalization_defect: f64,
    pub boundary_defect: f64,
    pub min_cone_slack: f64,
    /// `|E_m / I_m - lambda^m| / lambda^m`; `None` when `u` leaves the cone.
    pub rayleigh_defect: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub lambdas: Vec<f64>,
    /// Max pairwise `|lambda_a - lambda_b| / lambda`.
    pub lambda_spread: f64,
    /// Max pairwise sup-distance between normalized eigenfunctions.
    pub function_spread: f64,
}

struct PathTarget<'a> {
    c_root: f64,
    lambda: f64,
    f: &'a [f64],
}

impl Target for PathTarget<'_> {
    fn eval(&self, i: usize, u: f64) -> (f64, f64) {
        let cf = self.c_root * self.f[i];
        (cf * (1.0 - self.lambda * u), -cf * self.lambda)
    }
}

pub(crate) fn check_weight(f: &ScalarField, op: &'static str) -> Result<Vec<f64>> {
    let v = f.interior_values();
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonPositiveWeight { op, min });
    }
    Ok(v)
}

fn sup_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    v.iter().map(|x| x / -min).collect()
}

/// `sup |sigma_m(u) - C(n, m) (-lambda u f)^m|` over interior nodes.
pub fn eigen_residual(u: &ScalarField, f: &ScalarField, m: usize, lambda: f64) -> f64 {
    let grid = u.grid();
    let c = binomial(grid.n(), m);
    let vals = u.interior_values();
    let s = sigma_values(grid, &vals, m);
    (0..grid.interior_count())
        .map(|i| (s[i] - c * (-lambda * vals[i] * f.at_interior(i)).powi(m as i32)).abs())
        .fold(0.0, f64::max)
}

fn lambda_zero_solution(grid: &Arc<Grid>, m: usize, fv: &[f64], cfg: &SolverConfig) -> Result<(Vec<f64>, usize)> {
    let c = binomial(grid.n(), m);
    let h: Vec<f64> = fv.iter().map(|f| c * f.powi(m as i32)).collect();
    let sol = solve_sigma_m(grid, m, &ScalarField::from_interior(grid, &h), cfg, None)?;
    Ok((sol.u.interior_values(), sol.newton_iterations))
}

/// Zero of the line through `(l0, g0)` and `(l1, g1)`.
fn extrapolate(l0: f64, g0: f64, l1: f64, g1: f64) -> Option<f64> {
    (g0 > g1).then(|| l1 + g1 * (l1 - l0) / (g0 - g1))
}

/// Follows `sigma_m(u_lambda) = C(n, m) (1 - lambda u_lambda)^m f^m` upward
/// from `lambda = 0` until `sup |u_lambda|` exceeds `cfg.blowup_threshold`,
/// and returns the extrapolated blow-up point.
pub fn continuity_path(
    grid: &Arc<Grid>,
    m: usize,
    f: &ScalarField,
    cfg: &SolverConfig,
    policy: &LambdaPolicy,
) -> Result<EigenResult> {
    const OP: &str = "eigen_solver::continuity_path";
    check_m(grid.n(), m)?;
    cfg.validate()?;
    let fv = check_weight(f, OP)?;
    let c_root = binomial(grid.n(), m).powf(1.0 / m as f64);
    let (u0, mut newton_iterations) = lambda_zero_solution(grid, m, &fv, cfg)?;
    let s0 = sup_abs(&u0);
    let mut path = vec![(0.0, s0)];
    let mut states = vec![u0];
    let mut linear = LinearSolver::new();
    let mut lambda_try = policy.approach / s0;

    let solve_at = |lambda: f64, init: Vec<f64>, linear: &mut LinearSolver| {
        let target = PathTarget { c_root, lambda, f: &fv };
        newton::solve(grid, m, &target, cfg, init, linear, OP)
    };

    loop {
        let &(l_last, s_last) = path.last().unwrap();
        if lambda_try - l_last < policy.min_step * l_last.max(1.0) {
            return Err(Error::PathStagnation { lambda: l_last });
        }
        let s_pred = match path.len() {
            1 => s_last,
            k => {
                let (l0, s_prev) = path[k - 2];
                let (g0, g1) = (1.0 / s_prev, 1.0 / s_last);
                let g = g1 + (g1 - g0) / (l_last - l0) * (lambda_try - l_last);
                if g > 0.0 {
                    1.0 / g
                } else {
                    s_last
                }
            }
        };
        let scale = (s_pred / s_last).clamp(1.0, 10.0);
        let init: Vec<f64> = states.last().unwrap().iter().map(|u| scale * u).collect();
        let accepted = match solve_at(lambda_try, init, &mut linear) {
            Ok(out) => {
                newton_iterations += out.iterations;
                let s = sup_abs(&out.u);
                let nonpositive = out.u.iter().all(|&u| u <= 0.0);
                (nonpositive && s >= s_last * (1.0 - 1e-9)).then_some((out.u, s))
            }
            Err(_) => None,
        };
        let Some((u, s)) = accepted else {
            lambda_try = 0.5 * (l_last + lambda_try);
            continue;
        };
        path.push((lambda_try, s));
        states.push(u);
        if s >= cfg.blowup_threshold {
            break;
        }
        let k = path.len();
        let (l0, s_prev) = path[k - 2];
        lambda_try = match extrapolate(l0, 1.0 / s_prev, lambda_try, 1.0 / s) {
            Some(star) => lambda_try + policy.approach * (star - lambda_try),
            None => lambda_try + (lambda_try - l0),
        };
        if states.len() > 2 {
            let drop = states.len() - 2;
            states.drain(..drop);
        }
    }

    let k = path.len();
    let (l1, s1) = path[k - 1];
    let (l0, s0p) = path[k - 2];
    let lambda1 = extrapolate(l0, 1.0 / s0p, l1, 1.0 / s1).unwrap_or(l1);
    let lambda_error = if k >= 3 {
        let (lm, sm) = path[k - 3];
        extrapolate(lm, 1.0 / sm, l0, 1.0 / s0p)
            .map_or(lambda1 - l1, |prev| (lambda1 - prev).abs())
    } else {
        lambda1 - l1
    };

    let u_last = states.pop().unwrap();
    let u1 = ScalarField::from_interior(grid, &normalized(&u_last));

    // Path point closest below 0.9 lambda1 seeds the blow-up reference solve.
    let l_ref = 0.9 * lambda1;
    let (_, s_seed) = path
        .iter()
        .copied()
        .filter(|(l, _)| *l <= l_ref)
        .last()
        .unwrap_or(path[0]);
    let seed: Vec<f64> = u1.interior_values().iter().map(|u| u * s_seed).collect();
    let blowup_ratio = solve_at(l_ref, seed, &mut linear)
        .ok()
        .map(|out| {
            newton_iterations += out.iterations;
            s1 / sup_abs(&out.u)
        });

    let residual = eigen_residual(&u1, f, m, lambda1);
    Ok(EigenResult {
        lambda1,
        u1,
        iterations: path.len() - 1,
        path,
        residual,
        newton_iterations,
        method: EigenMethod::ContinuityPath,
        lambda_error,
        blowup_ratio,
    })
}

/// Solution `u_lambda` of `sigma_m(u) = C(n, m) (1 - lambda u)^m f^m` for a
/// fixed `lambda` below the first eigenvalue, reached by natural-parameter
/// continuation from `lambda = 0`.
pub fn solve_path_point(
    grid: &Arc<Grid>,
    m: usize,
    f: &ScalarField,
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<ScalarField> {
    const OP: &str = "eigen_solver::solve_path_point";
    check_m(grid.n(), m)?;
    cfg.validate()?;
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
    }
    let fv = check_weight(f, OP)?;
    let c_root = binomial(grid.n(), m).powf(1.0 / m as f64);
    let (mut u, _) = lambda_zero_solution(grid, m, &fv, cfg)?;
    let mut linear = LinearSolver::new();
    let mut cur = 0.0;
    let mut step = lambda;
    while cur < lambda {
        let next = (cur + step).min(lambda);
        let target = PathTarget { c_root, lambda: next, f: &fv };
        match newton::solve(grid, m, &target, cfg, u.clone(), &mut linear, OP) {
            Ok(out) if out.u.iter().all(|&v| v <= 0.0) => {
                u = out.u;
                cur = next;
                step *= 2.0;
            }
            _ => {
                step *= 0.5;
                if step < 1e-12 * lambda.max(1.0) {
                    return Err(Error::PathStagnation { lambda: cur });
                }
            }
        }
    }
    Ok(ScalarField::from_interior(grid, &u))
}

/// Normalized inverse iteration `sigma_m(w) = C(n, m) (-u_k)^m f^m`,
/// `lambda_{k+1} = 1 / sup |w|`, `u_{k+1} = lambda_{k+1} w`.
pub fn inverse_iteration(
    grid: &Arc<Grid>,
    m: usize,
    f: &ScalarField,
    cfg: &SolverConfig,
    initial: Option<&ScalarField>,
) -> Result<EigenResult> {
    const OP: &str = "eigen_solver::inverse_iteration";
    check_m(grid.n(), m)?;
    cfg.validate()?;
    let fv = check_weight(f, OP)?;
    let c_root = binomial(grid.n(), m).powf(1.0 / m as f64);
    let mut newton_iterations = 0;
    let mut u = match initial {
        Some(u0) => {
            let v = u0.interior_values();
            if v.iter().copied().fold(f64::INFINITY, f64::min) >= 0.0 {
                return Err(Error::InvalidParameter(
                    "inverse_iteration: initial field must be negative somewhere".into(),
                ));
            }
            normalized(&v)
        }
        None => {
            let (u0, it) = lambda_zero_solution(grid, m, &fv, cfg)?;
            newton_iterations += it;
            normalized(&u0)
        }
    };
    let mut lambda: Option<f64> = None;
    let mut path = Vec::new();
    let mut linear = LinearSolver::new();
    for k in 1..=cfg.max_eigen_iters {
        let target = FixedTarget {
            values: u.iter().zip(&fv).map(|(u, f)| c_root * (-u).max(0.0) * f).collect(),
        };
        let init = match lambda {
            Some(l) => u.iter().map(|u| u / l).collect(),
            None => {
                let h: Vec<f64> = target.values.iter().map(|t| t.powi(m as i32)).collect();
                crate::dirichlet::build_subsolution(grid, m, &ScalarField::from_interior(grid, &h))?
                    .interior_values()
            }
        };
        let out = newton::solve(grid, m, &target, cfg, init, &mut linear, OP)?;
        newton_iterations += out.iterations;
        let s = sup_abs(&out.u);
        if s == 0.0 {
            return Err(Error::ZeroDenominator { op: OP });
        }
        let l_new = 1.0 / s;
        let u_new: Vec<f64> = out.u.iter().map(|w| w * l_new).collect();
        path.push((l_new, s));
        let du = u.iter().zip(&u_new).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        let converged = lambda.is_some_and(|l| (l_new - l).abs() <= cfg.eigen_tol * l) && du <= cfg.eigen_tol;
        u = u_new;
        lambda = Some(l_new);
        if converged {
            let u1 = ScalarField::from_interior(grid, &normalized(&u));
            let residual = eigen_residual(&u1, f, m, l_new);
            return Ok(EigenResult {
                lambda1: l_new,
                u1,
                path,
                residual,
                iterations: k,
                newton_iterations,
                method: EigenMethod::InverseIteration,
                lambda_error: 0.0,
                blowup_ratio: None,
            });
        }
    }
    Err(Error::NonConvergence {
        op: OP,
        iterations: cfg.max_eigen_iters,
        residual: path.last().map_or(f64::NAN, |p| p.0),
    })
}

/// Residual, normalization, boundary, cone and Rayleigh defects of a
/// candidate eigenpair.
pub fn verify_eigenpair(u: &ScalarField, f: &ScalarField, m: usize, lambda: f64) -> EigenDiagnostics {
    let grid = u.grid();
    let vals = u.interior_values();
    let min_cone_slack = (0..grid.interior_count())
        .map(|i| cone_slack(&spectrum(&hessian_at(grid, &vals, i)), m))
        .fold(f64::INFINITY, f64::min);
    let lm = lambda.powi(m as i32);
    EigenDiagnostics {
        equation_residual: eigen_residual(u, f, m, lambda),
        normalization_defect: (u.interior_min() + 1.0).abs(),
        boundary_defect: u.boundary_defect(),
        min_cone_slack,
        rayleigh_defect: rayleigh(u, f, m).ok().map(|r| (r - lm).abs() / lm),
    }
}

/// Runs [`inverse_iteration`] from `k` starts `theta u0 + (1 - theta) A rho`
/// with `theta` drawn from a seeded generator, and reports the spread.
pub fn uniqueness_probe(
    grid: &Arc<Grid>,
    m: usize,
    f: &ScalarField,
    cfg: &SolverConfig,
    k: usize,
    seed: u64,
) -> Result<UniquenessReport> {
    if k == 0 {
        return Err(Error::InvalidParameter("uniqueness_probe needs k >= 1".into()));
    }
    check_m(grid.n(), m)?;
    let fv = check_weight(f, "eigen_solver::uniqueness_probe")?;
    let (u0, _) = lambda_zero_solution(grid, m, &fv, cfg)?;
    let u0 = normalized(&u0);
    let rho = normalized(&seed_profile(grid));
    let starts: Vec<ScalarField> = (0..k)
        .map(|j| {
            let theta: f64 = ChaCha8Rng::seed_from_u64(seed.wrapping_add(j as u64)).gen();
            let v: Vec<f64> = u0.iter().zip(&rho).map(|(a, b)| theta * a + (1.0 - theta) * b).collect();
            ScalarField::from_interior(grid, &v)
        })
        .collect();
    let runs: Vec<EigenResult> = starts
        .par_iter()
        .map(|s| inverse_iteration(grid, m, f, cfg, Some(s)))
        .collect::<Result<_>>()?;
    let mut lambda_spread = 0.0f64;
    let mut function_spread = 0.0f64;
    for a in 0..k {
        for b in a + 1..k {
            let (la, lb) = (runs[a].lambda1, runs[b].lambda1);
            lambda_spread = lambda_spread.max((la - lb).abs() / la.min(lb));
            function_spread = function_spread.max(runs[a].u1.sup_distance(&runs[b].u1));
        }
    }
    Ok(UniquenessReport {
        lambdas: runs.iter().map(|r| r.lambda1).collect(),
        lambda_spread,
        function_spread,
    })
}
