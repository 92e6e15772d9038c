//! Geometric lower and upper bounds on the first eigenvalue.

use serde::{Deserialize, Serialize};

use crate::dirichlet::check_m;
use crate::eigen::check_weight;
use crate::error::Result;
use crate::field::ScalarField;
use crate::geometry::{unit_ball_volume, Domain};
use crate::radial::{radial_eigen_shoot, radial_label, RadialLabel};

/// Relative slack of [`bounds_report`].
pub const REPORT_SLACK: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundFlags {
    pub alexandrov: bool,
    pub diam: Option<bool>,
    pub laplacian: Option<bool>,
    pub inscribed_ball: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsReport {
    pub lambda1_computed: f64,
    pub lower_alexandrov: f64,
    /// Only when `f = 1`.
    pub lower_diam: Option<f64>,
    pub upper_laplacian: Option<f64>,
    pub upper_inscribed_ball: Option<f64>,
    pub inscribed_ball_label: RadialLabel,
    pub flags: BoundFlags,
    pub pass: bool,
    /// Box domains have a non-smooth defining function.
    pub heuristic_domain: bool,
}

/// `||f||_{L^p}` over the domain: the mean of `f^p` over interior nodes
/// times the exact volume.
pub fn lp_norm(domain: &Domain, f: &ScalarField, p: f64) -> f64 {
    let v = f.interior_values();
    let mean = v.iter().map(|x| x.abs().powf(p)).sum::<f64>() / v.len() as f64;
    (mean * domain.volume()).powf(1.0 / p)
}

/// `(1/2) omega_{2n}^{1/(2n)} diam^{-1} ||f||_{L^{2n}}^{-1}`,
/// `omega_{2n} = pi^n / n!`.
pub fn lower_bound_alexandrov(domain: &Domain, f: &ScalarField) -> f64 {
    let p = 2.0 * domain.n() as f64;
    0.5 * unit_ball_volume(domain.n()).powf(1.0 / p) / domain.diameter() / lp_norm(domain, f, p)
}

/// `4 / diam^2`, valid for `f = 1`.
pub fn lower_bound_diam(domain: &Domain) -> f64 {
    4.0 / domain.diameter().powi(2)
}

/// `mu1 / (n inf f)` where `mu1` is the first eigenvalue of the Laplacian
/// `trace [u_{j kbar}]`, i.e. `n` times the `m = 1`, `f = 1` eigenvalue.
pub fn upper_bound_laplacian(domain: &Domain, f: &ScalarField, mu1: f64) -> Result<f64> {
    let fv = check_weight(f, "bounds::upper_bound_laplacian")?;
    let inf = fv.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(mu1 / (domain.n() as f64 * inf))
}

/// `lambda(B_1) / (R_in^2 inf f)`: the radial value of the unit ball moved
/// to the inscribed ball and divided by `inf f`.
pub fn upper_bound_inscribed_ball(domain: &Domain, f: &ScalarField, unit_ball_lambda: f64) -> Result<f64> {
    let fv = check_weight(f, "bounds::upper_bound_inscribed_ball")?;
    let inf = fv.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(unit_ball_lambda / domain.inradius().powi(2) / inf)
}

/// Radial shooter value for the unit ball in the dimension of `domain`.
pub fn inscribed_ball_radial(domain: &Domain, m: usize) -> Result<(f64, RadialLabel)> {
    check_m(domain.n(), m)?;
    let (lambda, _) = radial_eigen_shoot(domain.n(), m, 1.0, 1e-10)?;
    Ok((lambda, radial_label(domain.n(), m)))
}

/// Evaluates every applicable bound; `pass` iff each lower bound is at most
/// `lambda1 (1 + 3%)` and `lambda1` is at most each upper bound `(1 + 3%)`.
pub fn bounds_report(
    domain: &Domain,
    f: &ScalarField,
    m: usize,
    lambda1: f64,
    f_is_one: bool,
    mu1: Option<f64>,
) -> Result<BoundsReport> {
    let lower_alexandrov = lower_bound_alexandrov(domain, f);
    let lower_diam = f_is_one.then(|| lower_bound_diam(domain));
    let upper_laplacian = mu1.map(|mu| upper_bound_laplacian(domain, f, mu)).transpose()?;
    let (radial, label) = inscribed_ball_radial(domain, m)?;
    let upper_inscribed_ball = Some(upper_bound_inscribed_ball(domain, f, radial)?);
    let below = |b: f64| b <= lambda1 * (1.0 + REPORT_SLACK);
    let above = |b: f64| lambda1 <= b * (1.0 + REPORT_SLACK);
    let flags = BoundFlags {
        alexandrov: below(lower_alexandrov),
        diam: lower_diam.map(below),
        laplacian: upper_laplacian.map(above),
        inscribed_ball: upper_inscribed_ball.map(above),
    };
    let pass = flags.alexandrov
        && [flags.diam, flags.laplacian, flags.inscribed_ball]
            .iter()
            .all(|f| f.unwrap_or(true));
    Ok(BoundsReport {
        lambda1_computed: lambda1,
        lower_alexandrov,
        lower_diam,
        upper_laplacian,
        upper_inscribed_ball,
        inscribed_ball_label: label,
        flags,
        pass,
        heuristic_domain: domain.is_heuristic(),
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::geometry::{build_grid, DomainKind};

    const DISC: f64 = 1.445_796_490_736_696;

    fn disc_setup() -> (Domain, ScalarField) {
        let d = Domain::ball(1.0, 1).unwrap();
        let g = Arc::new(build_grid(&d, 1.0 / 32.0).unwrap());
        let f = ScalarField::sample(&g, |_| 1.0);
        (d, f)
    }

    #[test]
    fn disc_values() {
        let (d, f) = disc_setup();
        assert!((lower_bound_alexandrov(&d, &f) - 0.25).abs() < 1e-12);
        assert!((lower_bound_alexandrov(&d, &f.scaled(2.0)) - 0.125).abs() < 1e-12);
        assert_eq!(lower_bound_diam(&d), 1.0);
        assert_eq!(lower_bound_diam(&Domain::ball(0.5, 1).unwrap()), 4.0);
        assert!((upper_bound_laplacian(&d, &f, DISC).unwrap() - DISC).abs() < 1e-15);
        assert!((upper_bound_laplacian(&d, &f.scaled(4.0), DISC).unwrap() - DISC / 4.0).abs() < 1e-15);
        let (rad, _) = inscribed_ball_radial(&d, 1).unwrap();
        assert!((rad - DISC).abs() < 1e-8);
    }

    #[test]
    fn report_gates() {
        let (d, f) = disc_setup();
        let ok = bounds_report(&d, &f, 1, DISC, true, Some(DISC)).unwrap();
        assert!(ok.pass && ok.flags.alexandrov && ok.flags.diam == Some(true));
        let no_diam = bounds_report(&d, &f, 1, DISC, false, Some(DISC)).unwrap();
        assert!(no_diam.lower_diam.is_none());
        let wrong = bounds_report(&d, &f, 1, 2.0 * DISC, true, Some(DISC)).unwrap();
        assert!(!wrong.pass);
        assert_eq!(wrong.flags.laplacian, Some(false));
        assert_eq!(wrong.flags.inscribed_ball, Some(false));
    }

    #[test]
    fn box_inscribed_ball() {
        let d = Domain::new(DomainKind::Box, &[1.0, 1.0], 1, None).unwrap();
        let (rad, _) = inscribed_ball_radial(&d, 1).unwrap();
        assert!((rad - DISC).abs() < 1e-8);
        assert!(d.is_heuristic());
    }
}
