//! Model domains in C^n (n = 1, 2), their defining functions, and the
//! uniform grid used by every solver.
//!
//! Real coordinates are ordered `(x1, y1, x2, y2)`, so complex coordinate
//! `z_j` is `x[2j] + i x[2j+1]`.
//!
//! Boundary handling: each interior node carries, for every stencil
//! direction, two arms. An arm that reaches another interior node reads its
//! value; an arm that crosses the boundary is shortened to the crossing point
//! and reads the Dirichlet value 0 there. Arms that land on a boundary-band
//! node (inside the domain but within `BAND_FRACTION * h` of the zero level of
//! rho) read 0 at the node itself.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes with `rho(x) >= -BAND_FRACTION * h` are not solved for.
pub const BAND_FRACTION: f64 = 0.1;

/// Sentinel for "this arm reads the boundary value 0".
pub const NO_NODE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Ball,
    Ellipsoid,
    Box,
}

/// A bounded convex domain in C^n.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    n: usize,
    kind: DomainKind,
    /// Ball: `[R]`. Ellipsoid: one radius per real axis. Box: one half-width per real axis.
    params: Vec<f64>,
    center: Vec<f64>,
}

impl Domain {
    pub fn new(kind: DomainKind, params: &[f64], n: usize, center: Option<&[f64]>) -> Result<Self> {
        if n != 1 && n != 2 {
            return Err(Error::UnsupportedDimension(n));
        }
        let dim = 2 * n;
        let expected = match kind {
            DomainKind::Ball => 1,
            DomainKind::Ellipsoid | DomainKind::Box => dim,
        };
        if params.len() != expected {
            return Err(Error::InvalidParameter(format!(
                "{kind:?} in C^{n} needs {expected} parameter(s), got {}",
                params.len()
            )));
        }
        if params.iter().any(|&p| !(p.is_finite() && p > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "domain parameters must be positive, got {params:?}"
            )));
        }
        let center = match center {
            Some(c) if c.len() != dim => {
                return Err(Error::InvalidParameter(format!(
                    "center must have {dim} real coordinates"
                )))
            }
            Some(c) => c.to_vec(),
            None => vec![0.0; dim],
        };
        Ok(Self {
            n,
            kind,
            params: params.to_vec(),
            center,
        })
    }

    pub fn ball(radius: f64, n: usize) -> Result<Self> {
        Self::new(DomainKind::Ball, &[radius], n, None)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// The box has a piecewise-smooth defining function, so results on it
    /// carry no strong pseudoconvexity guarantee.
    pub fn is_heuristic(&self) -> bool {
        self.kind == DomainKind::Box
    }

    /// Half-extent of the bounding box along real axis `a`.
    pub fn half_extent(&self, a: usize) -> f64 {
        match self.kind {
            DomainKind::Ball => self.params[0],
            DomainKind::Ellipsoid | DomainKind::Box => self.params[a],
        }
    }

    /// Defining function: negative inside, zero on the boundary, positive outside.
    pub fn rho(&self, x: &[f64]) -> f64 {
        let c = &self.center;
        match self.kind {
            DomainKind::Ball => {
                let r = self.params[0];
                x.iter().zip(c).map(|(xi, ci)| (xi - ci).powi(2)).sum::<f64>() - r * r
            }
            DomainKind::Ellipsoid => {
                x.iter()
                    .zip(c)
                    .zip(&self.params)
                    .map(|((xi, ci), a)| ((xi - ci) / a).powi(2))
                    .sum::<f64>()
                    - 1.0
            }
            DomainKind::Box => x
                .iter()
                .zip(c)
                .zip(&self.params)
                .map(|((xi, ci), a)| (xi - ci).powi(2) - a * a)
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Smallest `t` in `(0, 1]` with `rho(x + t w) = 0`, for `x` inside the
    /// domain. `None` when the segment stays inside.
    pub fn boundary_fraction(&self, x: &[f64], w: &[f64]) -> Option<f64> {
        self.crossing(x, w).filter(|&t| t <= 1.0)
    }

    /// First `t > 0` with `x + t w` on the boundary.
    fn crossing(&self, x: &[f64], w: &[f64]) -> Option<f64> {
        let t = match self.kind {
            DomainKind::Ball | DomainKind::Ellipsoid => {
                let mut qa = 0.0;
                let mut qb = 0.0;
                for k in 0..x.len() {
                    let s = match self.kind {
                        DomainKind::Ball => 1.0,
                        _ => 1.0 / (self.params[k] * self.params[k]),
                    };
                    qa += s * w[k] * w[k];
                    qb += 2.0 * s * (x[k] - self.center[k]) * w[k];
                }
                let qc = self.rho(x);
                if qa == 0.0 {
                    return None;
                }
                let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
                // Positive root, written to avoid cancellation.
                if qb >= 0.0 {
                    (-2.0 * qc) / (qb + disc.sqrt())
                } else {
                    (-qb + disc.sqrt()) / (2.0 * qa)
                }
            }
            DomainKind::Box => {
                let mut t = f64::INFINITY;
                for k in 0..x.len() {
                    if w[k] == 0.0 {
                        continue;
                    }
                    let face = self.center[k] + self.params[k] * w[k].signum();
                    let tk = (face - x[k]) / w[k];
                    if tk > 0.0 {
                        t = t.min(tk);
                    }
                }
                t
            }
        };
        (t > 0.0 && t.is_finite()).then_some(t)
    }

    pub fn diameter(&self) -> f64 {
        match self.kind {
            DomainKind::Ball => 2.0 * self.params[0],
            DomainKind::Ellipsoid => 2.0 * self.params.iter().cloned().fold(0.0, f64::max),
            DomainKind::Box => 2.0 * self.params.iter().map(|a| a * a).sum::<f64>().sqrt(),
        }
    }

    pub fn inradius(&self) -> f64 {
        match self.kind {
            DomainKind::Ball => self.params[0],
            DomainKind::Ellipsoid | DomainKind::Box => {
                self.params.iter().cloned().fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Lebesgue volume in closed form.
    pub fn volume(&self) -> f64 {
        let unit = unit_ball_volume(self.n);
        match self.kind {
            DomainKind::Ball => unit * self.params[0].powi(2 * self.n as i32),
            DomainKind::Ellipsoid => unit * self.params.iter().product::<f64>(),
            DomainKind::Box => self.params.iter().map(|a| 2.0 * a).product(),
        }
    }
}

/// Volume of the unit ball of C^n = R^{2n}, i.e. pi^n / n!.
pub fn unit_ball_volume(n: usize) -> f64 {
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    PI.powi(n as i32) / fact
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Interior,
    BoundaryBand,
    Exterior,
}

/// Second-difference stencil along one direction at one interior node.
///
/// Estimates `v^T D^2u v` for the grid vector `v` (`e_a` or `e_a +- e_b`):
/// `wc * u(x) + wp * u(plus) + wm * u(minus)`, where a `NO_NODE` neighbor
/// contributes 0.
#[derive(Debug, Clone, Copy)]
pub struct DirectionStencil {
    pub plus: u32,
    pub minus: u32,
    pub wp: f64,
    pub wm: f64,
    pub wc: f64,
}

/// Uniform Cartesian grid over the bounding box of a domain.
#[derive(Debug, Clone)]
pub struct Grid {
    domain: Domain,
    h: f64,
    /// Nodes per axis are `2 * half[a] + 1`, centered on the domain center.
    half: Vec<usize>,
    dims: Vec<usize>,
    strides: Vec<usize>,
    class: Vec<NodeClass>,
    interior: Vec<usize>,
    interior_of: Vec<u32>,
    directions: Vec<Direction>,
    stencil: Vec<DirectionStencil>,
}

/// A stencil direction `e_a` (b = None) or `e_a + sign e_b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Direction {
    pub a: usize,
    pub b: Option<(usize, i8)>,
}

impl Direction {
    fn vector(&self, dim: usize) -> [i64; 4] {
        let mut v = [0i64; 4];
        v[self.a] = 1;
        if let Some((b, s)) = self.b {
            v[b] = s as i64;
        }
        debug_assert!(dim <= 4);
        v
    }
}

/// Real axis pairs whose mixed derivatives enter the off-diagonal entry
/// `u_{1 2bar}` for n = 2: (x1,x2), (y1,y2), (x1,y2), (y1,x2).
pub const MIXED_PAIRS: [(usize, usize); 4] = [(0, 2), (1, 3), (0, 3), (1, 2)];

fn directions_for(n: usize) -> Vec<Direction> {
    let dim = 2 * n;
    let mut dirs: Vec<Direction> = (0..dim).map(|a| Direction { a, b: None }).collect();
    if n == 2 {
        for &(a, b) in &MIXED_PAIRS {
            dirs.push(Direction { a, b: Some((b, 1)) });
            dirs.push(Direction { a, b: Some((b, -1)) });
        }
    }
    dirs
}

impl Grid {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn n(&self) -> usize {
        self.domain.n
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn node_count(&self) -> usize {
        self.class.len()
    }

    pub fn interior_count(&self) -> usize {
        self.interior.len()
    }

    pub fn class(&self, node: usize) -> NodeClass {
        self.class[node]
    }

    /// Flat node indices of the interior nodes, in increasing order.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    pub fn interior_index(&self, node: usize) -> Option<usize> {
        match self.interior_of[node] {
            NO_NODE => None,
            i => Some(i as usize),
        }
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    /// Stencils of interior node `i` (interior numbering), one per direction.
    pub fn stencil(&self, i: usize) -> &[DirectionStencil] {
        let nd = self.directions.len();
        &self.stencil[i * nd..(i + 1) * nd]
    }

    pub fn coords(&self, node: usize) -> [f64; 4] {
        let mut x = [0.0; 4];
        let mut rem = node;
        for a in 0..self.dim() {
            let j = rem % self.dims[a];
            rem /= self.dims[a];
            x[a] = self.domain.center[a] + (j as f64 - self.half[a] as f64) * self.h;
        }
        x
    }

    pub fn interior_coords(&self, i: usize) -> [f64; 4] {
        self.coords(self.interior[i])
    }

    /// Volume of the interior cells, `interior_count * h^{2n}`.
    pub fn cell_volume(&self) -> f64 {
        self.interior.len() as f64 * self.cell_weight()
    }

    pub fn cell_weight(&self) -> f64 {
        self.h.powi(self.dim() as i32)
    }

    fn multi_index(&self, node: usize) -> [i64; 4] {
        let mut j = [0i64; 4];
        let mut rem = node;
        for a in 0..self.dim() {
            j[a] = (rem % self.dims[a]) as i64;
            rem /= self.dims[a];
        }
        j
    }

    fn flat(&self, j: &[i64; 4]) -> Option<usize> {
        let mut idx = 0usize;
        for a in 0..self.dim() {
            if j[a] < 0 || j[a] >= self.dims[a] as i64 {
                return None;
            }
            idx += j[a] as usize * self.strides[a];
        }
        Some(idx)
    }

    fn arm(&self, node: usize, v: &[i64; 4], sign: i64) -> (u32, f64) {
        let dim = self.dim();
        let j = self.multi_index(node);
        let mut jn = [0i64; 4];
        for a in 0..dim {
            jn[a] = j[a] + sign * v[a];
        }
        if let Some(nb) = self.flat(&jn) {
            if self.class[nb] == NodeClass::Interior {
                return (self.interior_of[nb], 1.0);
            }
        }
        let x = self.coords(node);
        let mut w = [0.0; 4];
        for a in 0..dim {
            w[a] = (sign * v[a]) as f64 * self.h;
        }
        let theta = self
            .domain
            .crossing(&x[..dim], &w[..dim])
            .map_or(1.0, |t| t.min(2.0));
        (NO_NODE, theta)
    }
}

/// Builds the grid for `kind`/`params` in C^n with spacing `h`.
pub fn make_domain(kind: DomainKind, params: &[f64], n: usize, h: f64) -> Result<(Domain, Grid)> {
    let domain = Domain::new(kind, params, n, None)?;
    let grid = build_grid(&domain, h)?;
    Ok((domain, grid))
}

pub fn build_grid(domain: &Domain, h: f64) -> Result<Grid> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidParameter(format!("grid spacing must be positive, got {h}")));
    }
    let dim = domain.dim();
    let half: Vec<usize> = (0..dim)
        .map(|a| (domain.half_extent(a) / h + 1e-9).floor() as usize)
        .collect();
    let dims: Vec<usize> = half.iter().map(|k| 2 * k + 1).collect();
    let mut strides = vec![1usize; dim];
    for a in 1..dim {
        strides[a] = strides[a - 1] * dims[a - 1];
    }
    let total: usize = dims.iter().product();

    let mut grid = Grid {
        domain: domain.clone(),
        h,
        half,
        dims,
        strides,
        class: Vec::with_capacity(total),
        interior: Vec::new(),
        interior_of: vec![NO_NODE; total],
        directions: directions_for(domain.n),
        stencil: Vec::new(),
    };
    for node in 0..total {
        let x = grid.coords(node);
        let r = domain.rho(&x[..dim]);
        let c = if r < -BAND_FRACTION * h {
            NodeClass::Interior
        } else if r < 0.0 {
            NodeClass::BoundaryBand
        } else {
            NodeClass::Exterior
        };
        if c == NodeClass::Interior {
            grid.interior_of[node] = grid.interior.len() as u32;
            grid.interior.push(node);
        }
        grid.class.push(c);
    }
    if grid.interior.is_empty() {
        return Err(Error::ResolutionTooCoarse { h });
    }

    let nd = grid.directions.len();
    let mut stencil = Vec::with_capacity(grid.interior.len() * nd);
    for &node in &grid.interior {
        for d in &grid.directions {
            let v = d.vector(dim);
            let (plus, tp) = grid.arm(node, &v, 1);
            let (minus, tm) = grid.arm(node, &v, -1);
            // Non-uniform three-point second difference along v.
            let scale = 2.0 / (h * h * tp * tm * (tp + tm));
            stencil.push(DirectionStencil {
                plus,
                minus,
                wp: scale * tm,
                wm: scale * tp,
                wc: -scale * (tp + tm),
            });
        }
    }
    grid.stencil = stencil;
    Ok(grid)
}
