//! Discrete Dirichlet problem `sigma_m(u) = h`, `u = 0` on the boundary.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{DomainKind, Grid, NO_NODE};
use crate::hessian::{binomial, directional_coefficients, elementary, hessian_at, spectrum, HermitianMatrix};
use crate::linalg::{CsrMatrix, LinearMethod, LinearSolver};
use crate::newton::{self, FixedTarget};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_newton_iters: usize,
    /// Sup-norm tolerance on `sigma_m(u) - h`, relative to `max(1, sup h)`.
    pub residual_tol: f64,
    /// Backtracking factor in (0, 1).
    pub damping: f64,
    pub max_backtracks: usize,
    pub cone_slack: f64,
    pub fixedpoint_tol: f64,
    pub max_fixedpoint_iters: usize,
    pub linear_method: LinearMethod,
    pub linear_tol: f64,
    pub max_linear_iters: usize,
    /// Relative tolerance on successive eigenvalue and eigenfunction iterates.
    pub eigen_tol: f64,
    pub max_eigen_iters: usize,
    /// Sup-norm of `u_lambda` at which the continuity path stops.
    pub blowup_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_newton_iters: 50,
            residual_tol: 1e-9,
            damping: 0.5,
            max_backtracks: 40,
            cone_slack: 1e-10,
            fixedpoint_tol: 1e-10,
            max_fixedpoint_iters: 200,
            linear_method: LinearMethod::Auto,
            linear_tol: 1e-10,
            max_linear_iters: 2000,
            eigen_tol: 1e-10,
            max_eigen_iters: 500,
            blowup_threshold: 1e3,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("residual_tol", self.residual_tol),
            ("cone_slack", self.cone_slack),
            ("fixedpoint_tol", self.fixedpoint_tol),
            ("linear_tol", self.linear_tol),
            ("eigen_tol", self.eigen_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "damping must lie in (0, 1), got {}",
                self.damping
            )));
        }
        if self.max_newton_iters == 0 || self.max_backtracks == 0 || self.max_linear_iters == 0 {
            return Err(Error::InvalidParameter("iteration caps must be positive".into()));
        }
        if !(self.blowup_threshold > 1.0) {
            return Err(Error::InvalidParameter("blowup_threshold must exceed 1".into()));
        }
        Ok(())
    }
}

/// A solved Dirichlet problem with its Newton diagnostics.
#[derive(Debug, Clone)]
pub struct DirichletSolution {
    pub u: ScalarField,
    pub newton_iterations: usize,
    /// `sup |sigma_m(u) - h|` over interior nodes.
    pub residual: f64,
}

/// Result of [`fixed_point_decreasing`].
#[derive(Debug, Clone)]
pub struct FixedPointResult {
    pub u: ScalarField,
    /// `sup |u_j - u_{j-1}|` for every outer step.
    pub increments: Vec<f64>,
    /// Largest `u_{j-1} - u_j` seen over all steps and nodes.
    pub max_decrease: f64,
    /// Multiplier of the initial subsolution `A * rho`.
    pub subsolution_scale: f64,
}

pub(crate) fn check_m(n: usize, m: usize) -> Result<()> {
    if m == 0 || m > n {
        return Err(Error::InvalidParameter(format!(
            "m = {m} must satisfy 1 <= m <= n = {n}"
        )));
    }
    Ok(())
}

fn check_nonnegative(h: &ScalarField) -> Result<Vec<f64>> {
    let vals = h.interior_values();
    for (i, &v) in vals.iter().enumerate() {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::NegativeRhs {
                node: h.grid().interior_nodes()[i],
                value: v,
            });
        }
    }
    Ok(vals)
}

/// `sigma_m` of interior values at every interior node.
pub(crate) fn sigma_values(grid: &Grid, u: &[f64], m: usize) -> Vec<f64> {
    (0..grid.interior_count())
        .into_par_iter()
        .map(|i| elementary(spectrum(&hessian_at(grid, u, i)).values(), m))
        .collect()
}

/// Normalized operator `(sigma_m / C(n, m))^{1/m}` at every interior node
/// (0 where `sigma_m <= 0`).
pub(crate) fn normalized_sigma(grid: &Grid, u: &[f64], m: usize) -> Vec<f64> {
    let c = binomial(grid.n(), m);
    sigma_values(grid, u, m)
        .into_iter()
        .map(|s| (s.max(0.0) / c).powf(1.0 / m as f64))
        .collect()
}

/// Strictly m-subharmonic profile vanishing on the boundary, used to seed
/// subsolutions: `rho` itself for balls and ellipsoids and the circumscribed
/// ellipsoid `sum (x_k / a_k)^2 - 2n` for boxes.
pub fn seed_profile(grid: &Grid) -> Vec<f64> {
    let d = grid.domain();
    let dim = grid.dim();
    (0..grid.interior_count())
        .map(|i| {
            let x = grid.interior_coords(i);
            match d.kind() {
                DomainKind::Box => {
                    (0..dim)
                        .map(|k| ((x[k] - d.center()[k]) / d.half_extent(k)).powi(2))
                        .sum::<f64>()
                        - dim as f64
                }
                _ => d.rho(&x[..dim]),
            }
        })
        .collect()
}

fn laplacian_matrix(grid: &Grid) -> CsrMatrix {
    let nd = grid.directions().len();
    let mut coef = [0.0; 12];
    directional_coefficients(&HermitianMatrix::identity(grid.n()), &mut coef[..nd]);
    let rows = (0..grid.interior_count())
        .map(|i| {
            let mut row = Vec::with_capacity(2 * nd + 1);
            let mut center = 0.0;
            for (c, s) in coef[..nd].iter().zip(grid.stencil(i)) {
                if *c == 0.0 {
                    continue;
                }
                center += c * s.wc;
                if s.plus != NO_NODE {
                    row.push((s.plus as usize, c * s.wp));
                }
                if s.minus != NO_NODE {
                    row.push((s.minus as usize, c * s.wm));
                }
            }
            row.push((i, center));
            row
        })
        .collect();
    CsrMatrix::from_rows(rows)
}

/// Solves `trace [w_{j kbar}] = rhs` with `w = 0` on the boundary.
pub fn solve_laplace(grid: &Arc<Grid>, rhs: &ScalarField) -> Result<ScalarField> {
    let b = check_nonnegative(rhs)?;
    let cfg = SolverConfig::default();
    let a = laplacian_matrix(grid);
    let x = LinearSolver::new().solve(
        &a,
        &b,
        cfg.linear_method,
        grid.dim(),
        1e-13,
        cfg.max_linear_iters * 5,
    )?;
    Ok(ScalarField::from_interior(grid, &x))
}

/// `A * rho` with the smallest `A` such that `sigma_m(A rho) >= h` at every
/// interior node, `rho` being [`seed_profile`].
pub fn build_subsolution(grid: &Arc<Grid>, m: usize, h: &ScalarField) -> Result<ScalarField> {
    check_m(grid.n(), m)?;
    let hv = check_nonnegative(h)?;
    let rho = seed_profile(grid);
    let a = subsolution_scale(grid, m, &rho, &hv)?;
    Ok(ScalarField::from_interior(
        grid,
        &rho.iter().map(|r| a * r).collect::<Vec<_>>(),
    ))
}

fn subsolution_scale(grid: &Grid, m: usize, rho: &[f64], h: &[f64]) -> Result<f64> {
    let s = sigma_values(grid, rho, m);
    let mut a = 0.0f64;
    for (&hi, &si) in h.iter().zip(&s) {
        if hi == 0.0 {
            continue;
        }
        if si <= 0.0 {
            return Err(Error::OutsideCone {
                op: "dirichlet_solver::build_subsolution",
                m,
            });
        }
        a = a.max((hi / si).powf(1.0 / m as f64));
    }
    Ok(a)
}

/// Damped Newton solve of `sigma_m(u) = h`, started from `initial` or from
/// [`build_subsolution`].
pub fn solve_sigma_m(
    grid: &Arc<Grid>,
    m: usize,
    h: &ScalarField,
    cfg: &SolverConfig,
    initial: Option<&ScalarField>,
) -> Result<DirichletSolution> {
    check_m(grid.n(), m)?;
    cfg.validate()?;
    let hv = check_nonnegative(h)?;
    if hv.iter().all(|&v| v == 0.0) {
        return Ok(DirichletSolution {
            u: ScalarField::zeros(grid),
            newton_iterations: 0,
            residual: 0.0,
        });
    }
    let start = match initial {
        Some(u) => u.interior_values(),
        None => build_subsolution(grid, m, h)?.interior_values(),
    };
    let target = FixedTarget {
        values: hv.iter().map(|v| v.powf(1.0 / m as f64)).collect(),
    };
    let out = newton::solve(
        grid,
        m,
        &target,
        cfg,
        start,
        &mut LinearSolver::new(),
        "dirichlet_solver::solve_sigma_m",
    )?;
    Ok(DirichletSolution {
        u: ScalarField::from_interior(grid, &out.u),
        newton_iterations: out.iterations,
        residual: out.residual,
    })
}

/// Monotone iteration `sigma_m(u_j) = C(n, m) psi^m(x, u_{j-1})` for `psi`
/// nonincreasing in its second argument, started from a subsolution `A rho`.
pub fn fixed_point_decreasing<P>(grid: &Arc<Grid>, m: usize, psi: P, cfg: &SolverConfig) -> Result<FixedPointResult>
where
    P: Fn(&[f64], f64) -> f64 + Sync,
{
    check_m(grid.n(), m)?;
    cfg.validate()?;
    let dim = grid.dim();
    let c = binomial(grid.n(), m);
    let coords: Vec<[f64; 4]> = (0..grid.interior_count()).map(|i| grid.interior_coords(i)).collect();
    let eval_psi = |u: &[f64]| -> Result<Vec<f64>> {
        coords
            .iter()
            .zip(u)
            .enumerate()
            .map(|(i, (x, &s))| {
                let p = psi(&x[..dim], s);
                if !(p >= 0.0) || !p.is_finite() {
                    return Err(Error::NegativeRhs {
                        node: grid.interior_nodes()[i],
                        value: p,
                    });
                }
                Ok(p)
            })
            .collect()
    };
    let zero = vec![0.0; grid.interior_count()];
    let psi0 = eval_psi(&zero)?;
    if psi0.iter().all(|&p| p == 0.0) {
        return Ok(FixedPointResult {
            u: ScalarField::zeros(grid),
            increments: vec![],
            max_decrease: 0.0,
            subsolution_scale: 0.0,
        });
    }

    let rho = seed_profile(grid);
    let rho_hat = normalized_sigma(grid, &rho, m);
    let mut a = psi0
        .iter()
        .zip(&rho_hat)
        .map(|(p, r)| p / r)
        .fold(0.0f64, f64::max);
    let mut u: Vec<f64> = Vec::new();
    let mut found = false;
    for _ in 0..200 {
        u = rho.iter().map(|r| a * r).collect();
        let p = eval_psi(&u)?;
        if p.iter().zip(&rho_hat).all(|(p, r)| a * r >= *p) {
            found = true;
            break;
        }
        a *= 1.25;
    }
    if !found {
        return Err(Error::NonConvergence {
            op: "dirichlet_solver::fixed_point_decreasing (subsolution search)",
            iterations: 200,
            residual: f64::NAN,
        });
    }

    let mut increments = Vec::new();
    let mut max_decrease = f64::NEG_INFINITY;
    let mut linear = LinearSolver::new();
    for j in 1..=cfg.max_fixedpoint_iters {
        let p = eval_psi(&u)?;
        let target = FixedTarget {
            values: p.iter().map(|v| c.powf(1.0 / m as f64) * v).collect(),
        };
        let next = newton::solve(
            grid,
            m,
            &target,
            cfg,
            u.clone(),
            &mut linear,
            "dirichlet_solver::fixed_point_decreasing",
        )?
        .u;
        let dec = u.iter().zip(&next).fold(f64::NEG_INFINITY, |acc, (a, b)| acc.max(a - b));
        max_decrease = max_decrease.max(dec);
        if dec > 1e-9 {
            return Err(Error::MonotonicityViolation {
                iteration: j,
                amount: dec,
            });
        }
        let inc = u.iter().zip(&next).fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        increments.push(inc);
        u = next;
        if inc <= cfg.fixedpoint_tol {
            return Ok(FixedPointResult {
                u: ScalarField::from_interior(grid, &u),
                increments,
                max_decrease,
                subsolution_scale: a,
            });
        }
    }
    Err(Error::NonConvergence {
        op: "dirichlet_solver::fixed_point_decreasing",
        iterations: cfg.max_fixedpoint_iters,
        residual: increments.last().copied().unwrap_or(f64::NAN),
    })
}
