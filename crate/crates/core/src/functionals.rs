//! Discrete energy `E_m`, weighted volume `I_m`, the Rayleigh quotient and
//! Blocki's energy inequality.
//!
//! Integrals are Riemann sums over interior nodes with cell weight `h^{2n}`;
//! the constant relating the Kahler volume form to Lebesgue measure is
//! dropped.

use crate::dirichlet::sigma_values;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{Grid, NO_NODE};
use crate::hessian::{binomial, cone_slack, hessian_at, spectrum};

/// Cone violations smaller than this (relative to `max(1, sup sigma_1)`) are
/// treated as roundoff.
const CONE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureRule {
    /// Weight of every interior node, `h^{2n}`.
    pub cell_weight: f64,
    pub nodes: usize,
}

impl QuadratureRule {
    pub fn for_grid(grid: &Grid) -> Self {
        Self {
            cell_weight: grid.cell_weight(),
            nodes: grid.interior_count(),
        }
    }

    /// Cell-counted volume.
    pub fn total_weight(&self) -> f64 {
        self.cell_weight * self.nodes as f64
    }
}

fn check_cone(grid: &Grid, u: &[f64], m: usize, op: &'static str) -> Result<()> {
    let mut worst = f64::INFINITY;
    let mut scale = 1.0f64;
    for i in 0..grid.interior_count() {
        let s = spectrum(&hessian_at(grid, u, i));
        worst = worst.min(cone_slack(&s, m));
        scale = scale.max(s.values().iter().sum::<f64>().abs());
    }
    if worst < -CONE_TOL * scale {
        return Err(Error::OutsideCone { op, m });
    }
    Ok(())
}

/// `(m+1)^{-1} sum (-u) sigma_m(u) / C(n, m) h^{2n}`.
pub fn energy_e(u: &ScalarField, m: usize) -> Result<f64> {
    let grid = u.grid();
    let vals = u.interior_values();
    check_cone(grid, &vals, m, "functionals::energy_E")?;
    Ok(energy_density_sum(grid, &vals, m))
}

fn energy_density_sum(grid: &Grid, vals: &[f64], m: usize) -> f64 {
    let c = binomial(grid.n(), m);
    let s = sigma_values(grid, vals, m);
    let sum: f64 = vals.iter().zip(&s).map(|(u, s)| -u * s / c).sum();
    sum * grid.cell_weight() / (m + 1) as f64
}

/// `(m+1)^{-1} sum (-u)^{m+1} f^m h^{2n}`.
pub fn functional_i(u: &ScalarField, f: &ScalarField, m: usize) -> f64 {
    let grid = u.grid();
    let sum: f64 = (0..grid.interior_count())
        .map(|i| (-u.at_interior(i)).max(0.0).powi(m as i32 + 1) * f.at_interior(i).powi(m as i32))
        .sum();
    sum * grid.cell_weight() / (m + 1) as f64
}

/// `E_m(u) / I_m(u)`, whose infimum is `lambda_1^m`.
pub fn rayleigh(u: &ScalarField, f: &ScalarField, m: usize) -> Result<f64> {
    let i = functional_i(u, f, m);
    if i == 0.0 {
        return Err(Error::ZeroDenominator {
            op: "functionals::rayleigh",
        });
    }
    Ok(energy_e(u, m)? / i)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockiCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// `sum (-w)^{m+1} sigma_m(v) / C(n, m) h^{2n}` against
/// `(m+1)! (sup |v|)^m E_m(w)`.
pub fn blocki_check(w: &ScalarField, v: &ScalarField, m: usize) -> Result<BlockiCheck> {
    let grid = v.grid();
    let vv = v.interior_values();
    check_cone(grid, &vv, m, "functionals::blocki_check")?;
    let c = binomial(grid.n(), m);
    let s = sigma_values(grid, &vv, m);
    let lhs = (0..grid.interior_count())
        .map(|i| (-w.at_interior(i)).max(0.0).powi(m as i32 + 1) * s[i] / c)
        .sum::<f64>()
        * grid.cell_weight();
    let fact: f64 = (1..=m + 1).map(|k| k as f64).product();
    let rhs = fact * v.interior_sup_norm().powi(m as i32) * energy_e(w, m)?;
    Ok(BlockiCheck {
        lhs,
        rhs,
        pass: lhs <= rhs * (1.0 + 1e-6),
    })
}

/// Dirichlet-energy form of `E_1`: `(1/2) (1/(4n)) sum_edges (du)^2 h^{2n-2}`
/// over axis edges, with `u = 0` off the interior.
///
/// Equals the density form of [`energy_e`] at `m = 1` for fields vanishing
/// on every interior node whose stencil touches the boundary.
pub fn energy_flux_form(u: &ScalarField) -> f64 {
    let grid = u.grid();
    let vals = u.interior_values();
    let h = grid.h();
    let mut sum = 0.0;
    for i in 0..grid.interior_count() {
        for (d, s) in grid.directions().iter().zip(grid.stencil(i)) {
            if d.b.is_some() {
                continue;
            }
            let up = if s.plus == NO_NODE { 0.0 } else { vals[s.plus as usize] };
            sum += (up - vals[i]).powi(2);
            if s.minus == NO_NODE {
                sum += vals[i].powi(2);
            }
        }
    }
    let n = grid.n() as f64;
    0.5 / (4.0 * n) * sum * h.powi(grid.dim() as i32 - 2)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use super::*;
    use crate::geometry::{make_domain, DomainKind};

    fn disc(h: f64) -> Arc<Grid> {
        Arc::new(make_domain(DomainKind::Ball, &[1.0], 1, h).unwrap().1)
    }

    fn paraboloid(g: &Arc<Grid>) -> ScalarField {
        ScalarField::sample_interior(g, |x| x[0] * x[0] + x[1] * x[1] - 1.0)
    }

    #[test]
    fn disc_integrals() {
        let g = disc(1.0 / 256.0);
        let u = paraboloid(&g);
        let one = ScalarField::sample(&g, |_| 1.0);
        let e = energy_e(&u, 1).unwrap();
        let i = functional_i(&u, &one, 1);
        assert!((e - PI / 4.0).abs() < 1e-3, "{e}");
        assert!((i - PI / 6.0).abs() < 1e-3, "{i}");
        assert!((rayleigh(&u, &one, 1).unwrap() - 1.5).abs() < 2e-3);
        let b = blocki_check(&u, &u, 1).unwrap();
        assert!((b.lhs - PI / 3.0).abs() < 2e-3 && (b.rhs - PI / 2.0).abs() < 2e-3);
        assert!(b.pass);
    }

    #[test]
    fn zero_and_scaling() {
        let g = disc(1.0 / 32.0);
        let z = ScalarField::zeros(&g);
        let one = ScalarField::sample(&g, |_| 1.0);
        assert_eq!(energy_e(&z, 1).unwrap(), 0.0);
        assert_eq!(functional_i(&z, &one, 1), 0.0);
        assert!(matches!(rayleigh(&z, &one, 1), Err(Error::ZeroDenominator { .. })));
        let b = blocki_check(&z, &paraboloid(&g), 1).unwrap();
        assert_eq!((b.lhs, b.rhs), (0.0, 0.0));
        let u = paraboloid(&g);
        let c = 2.5;
        let uc = u.scaled(c);
        let e = energy_e(&u, 1).unwrap();
        assert!((energy_e(&uc, 1).unwrap() - c * c * e).abs() < 1e-10 * e.abs().max(1.0));
        let i = functional_i(&u, &one, 1);
        assert!((functional_i(&uc, &one, 1) - c * c * i).abs() < 1e-10);
        assert!((rayleigh(&uc, &one, 1).unwrap() - rayleigh(&u, &one, 1).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn flux_form_matches_energy() {
        for (n, h) in [(1, 1.0 / 40.0), (2, 1.0 / 8.0)] {
            let g = Arc::new(make_domain(DomainKind::Ball, &[1.0], n, h).unwrap().1);
            let u = ScalarField::sample_interior(&g, |x| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let q = (0.5 - r2).max(0.0);
                -q * q * q
            });
            let e = energy_density_sum(&g, &u.interior_values(), 1);
            let flux = energy_flux_form(&u);
            assert!((e - flux).abs() <= 1e-8 * e, "n = {n}: {e} vs {flux}");
        }
    }

    #[test]
    fn cone_violation_reported() {
        let g = disc(1.0 / 16.0);
        let u = ScalarField::sample_interior(&g, |x| 1.0 - x[0] * x[0] - x[1] * x[1]);
        assert!(energy_e(&u, 1).is_err());
    }
}
