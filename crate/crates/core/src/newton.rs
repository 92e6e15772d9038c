//! Damped Newton iteration for `sigma_m^{1/m}(u) = T(x, u)` on the interior
//! nodes, shared by the Dirichlet, eigenvalue and bifurcation solvers.

use rayon::prelude::*;

use crate::dirichlet::SolverConfig;
use crate::error::{Error, Result};
use crate::geometry::{Grid, NO_NODE};
use crate::hessian::{
    directional_coefficients, elementary, hessian_at, sigma_m_gradient, sigma_m_linearization,
    spectrum, HermitianMatrix,
};
use crate::linalg::{CsrMatrix, LinearSolver};

/// Right-hand side in root form: node `i` must satisfy
/// `sigma_m(H u)^{1/m} = value`, with `derivative = d value / d u_i`.
///
/// Nodes flagged `degenerate` (right-hand side identically 0) use the
/// polynomial form `sigma_m(H u) = 0` instead.
pub(crate) trait Target: Sync {
    fn eval(&self, i: usize, u: f64) -> (f64, f64);
    fn degenerate(&self, _i: usize) -> bool {
        false
    }
}

impl<F: Fn(usize, f64) -> (f64, f64) + Sync> Target for F {
    fn eval(&self, i: usize, u: f64) -> (f64, f64) {
        self(i, u)
    }
}

/// A fixed root-form right-hand side.
pub(crate) struct FixedTarget {
    pub values: Vec<f64>,
}

impl Target for FixedTarget {
    fn eval(&self, i: usize, _u: f64) -> (f64, f64) {
        (self.values[i], 0.0)
    }
    fn degenerate(&self, i: usize) -> bool {
        self.values[i] == 0.0
    }
}

#[derive(Debug, Clone)]
pub(crate) struct NewtonOutcome {
    pub u: Vec<f64>,
    pub iterations: usize,
    /// `sup |sigma_m(u) - T^m|`.
    pub residual: f64,
}

struct NodeState {
    hess: HermitianMatrix,
    in_cone: bool,
    root_residual: f64,
    sigma_residual: f64,
    target_power: f64,
}

struct State {
    nodes: Vec<NodeState>,
    in_cone: bool,
    root_inf: f64,
    sigma_inf: f64,
    scale: f64,
}

fn evaluate<T: Target>(grid: &Grid, m: usize, u: &[f64], target: &T, slack: f64) -> State {
    let n = grid.n();
    let mf = m as f64;
    let nodes: Vec<NodeState> = (0..grid.interior_count())
        .into_par_iter()
        .map(|i| {
            let hess = hessian_at(grid, u, i);
            let s = spectrum(&hess);
            let vals = &s.values()[..n];
            let thr = if target.degenerate(i) { -slack } else { slack };
            let in_cone = (1..=m).all(|k| elementary(vals, k) > thr);
            let sm = elementary(vals, m);
            let (t, _) = target.eval(i, u[i]);
            let tp = t.max(0.0).powi(m as i32);
            let root_residual = if target.degenerate(i) {
                sm
            } else if in_cone {
                sm.powf(1.0 / mf) - t
            } else {
                f64::NAN
            };
            NodeState {
                hess,
                in_cone,
                root_residual,
                sigma_residual: sm - tp,
                target_power: tp,
            }
        })
        .collect();
    let in_cone = nodes.iter().all(|s| s.in_cone);
    let root_inf = nodes.iter().fold(0.0f64, |a, s| a.max(s.root_residual.abs()));
    let sigma_inf = nodes.iter().fold(0.0f64, |a, s| a.max(s.sigma_residual.abs()));
    let scale = nodes.iter().fold(1.0f64, |a, s| a.max(s.target_power));
    State {
        nodes,
        in_cone,
        root_inf,
        sigma_inf,
        scale,
    }
}

fn jacobian<T: Target>(grid: &Grid, m: usize, u: &[f64], state: &State, target: &T) -> Result<CsrMatrix> {
    let nd = grid.directions().len();
    let rows: Result<Vec<Vec<(usize, f64)>>> = (0..grid.interior_count())
        .into_par_iter()
        .map(|i| {
            let ns = &state.nodes[i];
            let f = if target.degenerate(i) {
                sigma_m_gradient(&ns.hess, m)
            } else {
                sigma_m_linearization(&ns.hess, m)?
            };
            let mut coef = [0.0; 12];
            directional_coefficients(&f, &mut coef[..nd]);
            let (_, dt) = target.eval(i, u[i]);
            let mut center = -dt;
            let mut row = Vec::with_capacity(2 * nd + 1);
            for (c, s) in coef[..nd].iter().zip(grid.stencil(i)) {
                center += c * s.wc;
                if s.plus != NO_NODE {
                    row.push((s.plus as usize, c * s.wp));
                }
                if s.minus != NO_NODE {
                    row.push((s.minus as usize, c * s.wm));
                }
            }
            row.push((i, center));
            Ok(row)
        })
        .collect();
    Ok(CsrMatrix::from_rows(rows?))
}

/// Converged when `sup |sigma_m(u) - T^m| <= residual_tol * max(1, sup T^m)`.
pub(crate) fn solve<T: Target>(
    grid: &Grid,
    m: usize,
    target: &T,
    cfg: &SolverConfig,
    initial: Vec<f64>,
    linear: &mut LinearSolver,
    op: &'static str,
) -> Result<NewtonOutcome> {
    let mut u = initial;
    let mut state = evaluate(grid, m, &u, target, cfg.cone_slack);
    if !state.in_cone {
        return Err(Error::OutsideCone { op, m });
    }
    for it in 0..=cfg.max_newton_iters {
        if state.sigma_inf <= cfg.residual_tol * state.scale {
            return Ok(NewtonOutcome {
                u,
                iterations: it,
                residual: state.sigma_inf,
            });
        }
        if it == cfg.max_newton_iters {
            break;
        }
        let jac = jacobian(grid, m, &u, &state, target)?;
        let rhs: Vec<f64> = state.nodes.iter().map(|s| -s.root_residual).collect();
        let delta = linear.solve(
            &jac,
            &rhs,
            cfg.linear_method,
            grid.dim(),
            cfg.linear_tol,
            cfg.max_linear_iters,
        )?;
        let mut alpha = 1.0;
        let mut saw_cone = false;
        let mut accepted = None;
        for _ in 0..cfg.max_backtracks {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + alpha * d).collect();
            let ts = evaluate(grid, m, &trial, target, cfg.cone_slack);
            if ts.in_cone {
                saw_cone = true;
                if ts.root_inf < state.root_inf || ts.sigma_inf <= cfg.residual_tol * ts.scale {
                    accepted = Some((trial, ts));
                    break;
                }
            }
            alpha *= cfg.damping;
        }
        match accepted {
            Some((trial, ts)) => {
                u = trial;
                state = ts;
            }
            None if saw_cone => {
                return Err(Error::NonConvergence {
                    op,
                    iterations: it + 1,
                    residual: state.sigma_inf,
                })
            }
            None => return Err(Error::ConeEscape { iteration: it + 1 }),
        }
    }
    Err(Error::NonConvergence {
        op,
        iterations: cfg.max_newton_iters,
        residual: state.sigma_inf,
    })
}
