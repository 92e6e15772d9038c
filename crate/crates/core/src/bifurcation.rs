//! `sigma_m(u) = C(n, m) psi(z, u)^m`, `u = 0` on the boundary, under the
//! slope condition `d_s psi >= -gamma0 > -lambda_1`, by continuation in
//! `t` from a subsolution.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dirichlet::{check_m, fixed_point_decreasing, normalized_sigma, SolverConfig};
use crate::eigen::solve_path_point;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::Grid;
use crate::hessian::binomial;
use crate::linalg::LinearSolver;
use crate::newton::{self, Target};

/// Number of sampled `(node, s)` pairs in the slope check.
pub const SLOPE_SAMPLES: usize = 1000;

/// Right-hand side `psi(x, s)` for `s <= 0`.
pub trait Psi: Sync {
    fn value(&self, x: &[f64], s: f64) -> f64;
    /// `d psi / d s`.
    fn slope(&self, x: &[f64], s: f64) -> f64;
}

/// Named families of `psi`, independent of `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PsiFamily {
    /// `a - b s`.
    Affine { a: f64, b: f64 },
    /// `a exp(-b s)`.
    Exponential { a: f64, b: f64 },
    /// Piecewise linear through `(s[k], psi[k])`, `s` increasing, extended
    /// linearly beyond the end points.
    Table { s: Vec<f64>, psi: Vec<f64> },
}

impl PsiFamily {
    pub fn validate(&self) -> Result<()> {
        match self {
            PsiFamily::Affine { a, b } | PsiFamily::Exponential { a, b } => {
                if !(a.is_finite() && b.is_finite() && *a > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "psi family needs a > 0 and finite b, got a = {a}, b = {b}"
                    )));
                }
            }
            PsiFamily::Table { s, psi } => {
                if s.len() < 2 || s.len() != psi.len() {
                    return Err(Error::InvalidParameter(
                        "psi table needs at least two (s, psi) pairs of equal length".into(),
                    ));
                }
                if s.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::InvalidParameter("psi table s must be increasing".into()));
                }
            }
        }
        Ok(())
    }

    fn segment(s: &[f64], s0: f64) -> usize {
        s.partition_point(|&v| v <= s0).clamp(1, s.len() - 1) - 1
    }
}

impl Psi for PsiFamily {
    fn value(&self, _x: &[f64], s: f64) -> f64 {
        match self {
            PsiFamily::Affine { a, b } => a - b * s,
            PsiFamily::Exponential { a, b } => a * (-b * s).exp(),
            PsiFamily::Table { s: ts, psi } => {
                let k = Self::segment(ts, s);
                let w = (s - ts[k]) / (ts[k + 1] - ts[k]);
                psi[k] + w * (psi[k + 1] - psi[k])
            }
        }
    }

    fn slope(&self, _x: &[f64], s: f64) -> f64 {
        match self {
            PsiFamily::Affine { b, .. } => -b,
            PsiFamily::Exponential { a, b } => -b * a * (-b * s).exp(),
            PsiFamily::Table { s: ts, psi } => {
                let k = Self::segment(ts, s);
                (psi[k + 1] - psi[k]) / (ts[k + 1] - ts[k])
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationOptions {
    /// Initial and maximal `t` step.
    pub dt: f64,
    pub min_dt: f64,
    /// Subsolution parameter in `(gamma0, lambda1)`; midpoint when absent.
    pub gamma: Option<f64>,
    /// Cross-check against the monotone iteration when `psi` is nonincreasing.
    pub fixed_point_check: bool,
    pub seed: u64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            dt: 0.1,
            min_dt: 1e-6,
            gamma: None,
            fixed_point_check: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BifurcationResult {
    pub u: ScalarField,
    /// `sup |(sigma_m(u) / C(n, m))^{1/m} - psi(x, u)|`.
    pub residual: f64,
    /// Accepted `t` values.
    pub schedule: Vec<f64>,
    pub newton_iterations: usize,
    pub gamma: f64,
    /// `sup psi(., 0)`, the multiplier of the subsolution.
    pub subsolution_scale: f64,
    /// Smallest sampled finite-difference slope of `psi`.
    pub min_slope: f64,
    /// Sup-distance to the monotone-iteration solution, when computed.
    pub fixed_point_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationSpread {
    pub spread: f64,
    pub steps: Vec<f64>,
    pub gammas: Vec<f64>,
}

struct HomotopyTarget<'a, P: Psi> {
    psi: &'a P,
    coords: &'a [[f64; 4]],
    dim: usize,
    base: &'a [f64],
    t: f64,
    c_root: f64,
}

impl<P: Psi> Target for HomotopyTarget<'_, P> {
    fn eval(&self, i: usize, u: f64) -> (f64, f64) {
        let x = &self.coords[i][..self.dim];
        let v = self.t * self.psi.value(x, u) + (1.0 - self.t) * self.base[i];
        let d = self.t * self.psi.slope(x, u);
        (self.c_root * v, self.c_root * d)
    }
}

fn check_slopes<P: Psi>(
    psi: &P,
    coords: &[[f64; 4]],
    dim: usize,
    s_min: f64,
    gamma0: f64,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_slope = f64::INFINITY;
    for _ in 0..SLOPE_SAMPLES {
        let x = &coords[rng.gen_range(0..coords.len())][..dim];
        let s: f64 = rng.gen_range(s_min..=0.0);
        let d = 1e-6 * s.abs().max(1.0);
        let slope = (psi.value(x, s + d) - psi.value(x, s - d)) / (2.0 * d);
        let p = psi.value(x, s);
        if !(p > 0.0) {
            return Err(Error::InvalidParameter(format!("psi must be positive, got {p} at s = {s}")));
        }
        if slope < -gamma0 - 1e-6 * (1.0 + gamma0) {
            return Err(Error::SlopeBoundViolated {
                s,
                slope,
                bound: -gamma0,
            });
        }
        min_slope = min_slope.min(slope);
    }
    Ok(min_slope)
}

/// Solves `sigma_m(u) = C(n, m) psi(x, u)^m` along
/// `sigma_m^{1/m}(u_t) ~ t psi(x, u_t) + (1 - t) sigma_m^{1/m}(u_sub)` where
/// `u_sub = sup psi(., 0) u_gamma` and `u_gamma` solves the continuity-path
/// equation at `lambda = gamma`.
pub fn solve_bifurcation<P: Psi>(
    grid: &Arc<Grid>,
    m: usize,
    psi: &P,
    gamma0: f64,
    lambda1: f64,
    cfg: &SolverConfig,
    opts: &ContinuationOptions,
) -> Result<BifurcationResult> {
    const OP: &str = "bifurcation::solve_bifurcation";
    check_m(grid.n(), m)?;
    cfg.validate()?;
    if !(gamma0 >= 0.0 && lambda1 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need gamma0 >= 0 and lambda1 > 0, got {gamma0}, {lambda1}"
        )));
    }
    if gamma0 >= lambda1 {
        return Err(Error::PreconditionViolated { gamma0, lambda1 });
    }
    let gamma = opts.gamma.unwrap_or(0.5 * (gamma0 + lambda1));
    if !(gamma > gamma0 && gamma < lambda1) {
        return Err(Error::InvalidParameter(format!(
            "gamma = {gamma} must lie in (gamma0, lambda1) = ({gamma0}, {lambda1})"
        )));
    }
    let dim = grid.dim();
    let coords: Vec<[f64; 4]> = (0..grid.interior_count()).map(|i| grid.interior_coords(i)).collect();
    let cc = coords.iter().map(|x| psi.value(&x[..dim], 0.0)).fold(f64::NEG_INFINITY, f64::max);
    if !(cc > 0.0) {
        return Err(Error::InvalidParameter("psi(., 0) must be positive".into()));
    }

    let one = ScalarField::sample(grid, |_| 1.0);
    let u_gamma = solve_path_point(grid, m, &one, gamma, cfg)?.interior_values();
    let sub: Vec<f64> = u_gamma.iter().map(|u| cc * u).collect();
    let s_min = -2.0 * sub.iter().fold(0.0f64, |a, u| a.max(u.abs()));
    let min_slope = check_slopes(psi, &coords, dim, s_min, gamma0, opts.seed)?;
    let base = normalized_sigma(grid, &sub, m);
    let c_root = binomial(grid.n(), m).powf(1.0 / m as f64);

    let mut u = sub;
    let mut t = 0.0;
    let mut dt = opts.dt;
    let mut schedule = vec![0.0];
    let mut newton_iterations = 0;
    let mut linear = LinearSolver::new();
    while t < 1.0 {
        let next = (t + dt).min(1.0);
        let target = HomotopyTarget {
            psi,
            coords: &coords,
            dim,
            base: &base,
            t: next,
            c_root,
        };
        match newton::solve(grid, m, &target, cfg, u.clone(), &mut linear, OP) {
            Ok(out) => {
                newton_iterations += out.iterations;
                u = out.u;
                t = next;
                schedule.push(t);
            }
            Err(_) => {
                dt *= 0.5;
                if dt < opts.min_dt {
                    return Err(Error::ContinuationStall { t });
                }
            }
        }
    }

    let sig = normalized_sigma(grid, &u, m);
    let residual = (0..u.len())
        .map(|i| (sig[i] - psi.value(&coords[i][..dim], u[i])).abs())
        .fold(0.0, f64::max);
    let u = ScalarField::from_interior(grid, &u);
    let fixed_point_gap = if opts.fixed_point_check && min_slope <= 0.0 && is_nonincreasing(psi, &coords, dim, s_min) {
        let fp = fixed_point_decreasing(grid, m, |x, s| psi.value(x, s), cfg)?;
        Some(fp.u.sup_distance(&u))
    } else {
        None
    };
    Ok(BifurcationResult {
        u,
        residual,
        schedule,
        newton_iterations,
        gamma,
        subsolution_scale: cc,
        min_slope,
        fixed_point_gap,
    })
}

fn is_nonincreasing<P: Psi>(psi: &P, coords: &[[f64; 4]], dim: usize, s_min: f64) -> bool {
    let stride = (coords.len() / 50).max(1);
    coords.iter().step_by(stride).all(|x| {
        (0..=20).all(|k| psi.slope(&x[..dim], s_min * k as f64 / 20.0) <= 0.0)
    })
}

/// Runs [`solve_bifurcation`] with `k` randomized schedules
/// (`dt` in `[0.02, 0.2]`, `gamma` in the middle half of `(gamma0, lambda1)`)
/// and reports the largest pairwise sup-distance.
#[allow(clippy::too_many_arguments)]
pub fn check_uniqueness_bifurcation<P: Psi>(
    grid: &Arc<Grid>,
    m: usize,
    psi: &P,
    gamma0: f64,
    lambda1: f64,
    cfg: &SolverConfig,
    k: usize,
    seed: u64,
) -> Result<BifurcationSpread> {
    if k == 0 {
        return Err(Error::InvalidParameter("need k >= 1 starts".into()));
    }
    if gamma0 >= lambda1 {
        return Err(Error::PreconditionViolated { gamma0, lambda1 });
    }
    let opts: Vec<ContinuationOptions> = (0..k)
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(j as u64));
            ContinuationOptions {
                dt: rng.gen_range(0.02..=0.2),
                gamma: Some(gamma0 + (lambda1 - gamma0) * rng.gen_range(0.25..=0.75)),
                fixed_point_check: false,
                ..ContinuationOptions::default()
            }
        })
        .collect();
    let runs: Vec<BifurcationResult> = opts
        .par_iter()
        .map(|o| solve_bifurcation(grid, m, psi, gamma0, lambda1, cfg, o))
        .collect::<Result<_>>()?;
    let mut spread = 0.0f64;
    for a in 0..k {
        for b in a + 1..k {
            spread = spread.max(runs[a].u.sup_distance(&runs[b].u));
        }
    }
    Ok(BifurcationSpread {
        spread,
        steps: opts.iter().map(|o| o.dt).collect(),
        gammas: runs.iter().map(|r| r.gamma).collect(),
    })
}
