//! Radial reduction on balls: for `u(z) = v(|z|^2)` the complex Hessian has
//! eigenvalues `v'` (multiplicity `n - 1`) and `v' + t v''`, so the
//! eigenvalue problem with `f = 1` becomes an ODE in `t = |z|^2`, solved
//! here by shooting on `lambda`.

use serde::{Deserialize, Serialize};

use crate::dirichlet::check_m;
use crate::error::{Error, Result};
use crate::hessian::binomial;

/// Whether the radial value is known to be the first eigenvalue of the ball
/// or only an upper bound through the Rayleigh quotient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialLabel {
    Eigenvalue,
    RayleighWitness,
}

pub fn radial_label(n: usize, m: usize) -> RadialLabel {
    if m > 1 && m < n {
        RadialLabel::RayleighWitness
    } else {
        RadialLabel::Eigenvalue
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub n: usize,
    pub m: usize,
    pub radius: f64,
    pub lambda: f64,
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub dv: Vec<f64>,
}

impl RadialProfile {
    /// Cubic Hermite interpolation of `v` at `t`, 0 beyond `R^2`.
    pub fn eval(&self, t: f64) -> f64 {
        let last = self.t.len() - 1;
        if t >= self.t[last] {
            return 0.0;
        }
        if t <= self.t[0] {
            return self.v[0];
        }
        let k = self.t.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (self.t[k], self.t[k + 1]);
        let dt = t1 - t0;
        let s = (t - t0) / dt;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        h00 * self.v[k] + h10 * dt * self.dv[k] + h01 * self.v[k + 1] + h11 * dt * self.dv[k + 1]
    }
}

/// `C(n-1, m) v'^m + C(n-1, m-1) v'^{m-1} (v' + t v'')`.
pub fn radial_sigma_m(dv: f64, d2v: f64, t: f64, n: usize, m: usize) -> f64 {
    binomial(n - 1, m) * dv.powi(m as i32)
        + binomial(n - 1, m - 1) * dv.powi(m as i32 - 1) * (dv + t * d2v)
}

struct Shooter {
    m: i32,
    lambda: f64,
    c: f64,
    b: f64,
}

impl Shooter {
    fn new(n: usize, m: usize, lambda: f64) -> Self {
        Self {
            m: m as i32,
            lambda,
            c: binomial(n, m),
            b: binomial(n - 1, m - 1),
        }
    }

    fn rhs(&self, t: f64, y: [f64; 2]) -> [f64; 2] {
        let [v, p] = y;
        let target = (self.lambda * (-v).max(0.0)).powi(self.m);
        let dp = self.c * (target - p.powi(self.m)) / (self.b * p.powi(self.m - 1) * t);
        [p, dp]
    }

    /// Two-term series `v = -1 + lambda t + c2 t^2` near the origin.
    fn series(&self, t: f64) -> [f64; 2] {
        let mf = self.m as f64;
        let c2 = -self.c * mf * self.lambda.powi(2) / (2.0 * (self.b + self.c * mf));
        [-1.0 + self.lambda * t + c2 * t * t, self.lambda + 2.0 * c2 * t]
    }
}

const A21: f64 = 1.0 / 5.0;
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
const B5: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

fn axpy(y: [f64; 2], terms: &[([f64; 2], f64)], h: f64) -> [f64; 2] {
    let mut out = y;
    for (k, a) in terms {
        out[0] += h * a * k[0];
        out[1] += h * a * k[1];
    }
    out
}

enum Outcome {
    /// Reached `t_end`; samples `(t, v, v')`.
    Reached(Vec<[f64; 3]>),
    /// `v` became nonnegative at this `t < t_end`.
    Crossed(f64),
}

/// Dormand-Prince 5(4) from `t0` to `t_end`, stopping early if `v >= 0`.
fn integrate(sh: &Shooter, t0: f64, y0: [f64; 2], t_end: f64, tol: f64) -> Result<Outcome> {
    let mut t = t0;
    let mut y = y0;
    let mut h = (t_end - t0) * 1e-3;
    let h_min = t_end * 1e-15;
    let mut samples = vec![[t, y[0], y[1]]];
    let mut k1 = sh.rhs(t, y);
    while t < t_end {
        h = h.min(t_end - t);
        if h < h_min {
            return Err(Error::StiffStep { t });
        }
        let k2 = sh.rhs(t + C[0] * h, axpy(y, &[(k1, A21)], h));
        let k3 = sh.rhs(t + C[1] * h, axpy(y, &[(k1, A3[0]), (k2, A3[1])], h));
        let k4 = sh.rhs(t + C[2] * h, axpy(y, &[(k1, A4[0]), (k2, A4[1]), (k3, A4[2])], h));
        let k5 = sh.rhs(
            t + C[3] * h,
            axpy(y, &[(k1, A5[0]), (k2, A5[1]), (k3, A5[2]), (k4, A5[3])], h),
        );
        let k6 = sh.rhs(
            t + C[4] * h,
            axpy(y, &[(k1, A6[0]), (k2, A6[1]), (k3, A6[2]), (k4, A6[3]), (k5, A6[4])], h),
        );
        let y5 = axpy(
            y,
            &[(k1, B5[0]), (k3, B5[2]), (k4, B5[3]), (k5, B5[4]), (k6, B5[5])],
            h,
        );
        let k7 = sh.rhs(t + h, y5);
        let ks = [k1, k2, k3, k4, k5, k6, k7];
        let mut err = 0.0f64;
        for c in 0..2 {
            let e: f64 = ks.iter().zip(E).map(|(k, e)| e * k[c]).sum::<f64>() * h;
            let sc = tol * (1.0 + y[c].abs().max(y5[c].abs()));
            err = err.max((e / sc).abs());
        }
        if err <= 1.0 && y5.iter().all(|v| v.is_finite()) {
            t += h;
            y = y5;
            k1 = k7;
            samples.push([t, y[0], y[1]]);
            if y[0] >= 0.0 && t < t_end * (1.0 - 1e-14) {
                return Ok(Outcome::Crossed(t));
            }
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= if err.is_finite() { factor } else { 0.2 };
    }
    Ok(Outcome::Reached(samples))
}

fn shoot(n: usize, m: usize, lambda: f64, r2: f64, tol: f64) -> Result<(f64, Option<Vec<[f64; 3]>>)> {
    let sh = Shooter::new(n, m, lambda);
    let t0 = 1e-5 * r2;
    let y0 = sh.series(t0);
    match integrate(&sh, t0, y0, r2, tol)? {
        Outcome::Reached(mut s) => {
            s.insert(0, [0.0, -1.0, lambda]);
            Ok((s.last().unwrap()[1], Some(s)))
        }
        Outcome::Crossed(t) => Ok((r2 - t + f64::MIN_POSITIVE, None)),
    }
}

fn beta_int(a: usize, b: usize) -> f64 {
    let fact = |k: usize| (1..=k).map(|j| j as f64).product::<f64>();
    fact(a - 1) * fact(b - 1) / fact(a + b - 1)
}

/// Rayleigh quotient bound from the paraboloid `|z|^2 - R^2`:
/// `(B(n, 2) / B(n, m + 2))^{1/m} / R^2`.
pub fn paraboloid_witness(n: usize, m: usize, radius: f64) -> f64 {
    (beta_int(n, 2) / beta_int(n, m + 2)).powf(1.0 / m as f64) / (radius * radius)
}

/// First radial eigenvalue of the ball of radius `radius` in C^n with
/// `f = 1`, to relative bracket width `tol`, and its profile.
pub fn radial_eigen_shoot(n: usize, m: usize, radius: f64, tol: f64) -> Result<(f64, RadialProfile)> {
    if !(1..=2).contains(&n) {
        return Err(Error::UnsupportedDimension(n));
    }
    check_m(n, m)?;
    if !(radius > 0.0 && tol > 0.0) {
        return Err(Error::InvalidParameter("radius and tol must be positive".into()));
    }
    let r2 = radius * radius;
    let ode_tol = (tol * 1e-3).clamp(1e-13, 1e-8);
    let mut lo = 1.0 / r2;
    let mut hi = paraboloid_witness(n, m, radius);
    let (lo0, hi0) = (lo, hi);
    let mut tries = 0;
    while shoot(n, m, lo, r2, ode_tol)?.0 >= 0.0 {
        lo *= 0.5;
        tries += 1;
        if tries > 60 {
            return Err(Error::BracketNotFound { lo: lo0, hi: hi0 });
        }
    }
    while shoot(n, m, hi, r2, ode_tol)?.0 < 0.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(Error::BracketNotFound { lo: lo0, hi: hi0 });
        }
    }
    while hi - lo > tol * lo {
        let mid = 0.5 * (lo + hi);
        if shoot(n, m, mid, r2, ode_tol)?.0 < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let (_, samples) = shoot(n, m, lo, r2, ode_tol)?;
    let samples = samples.expect("lower bracket end reaches the boundary");
    let profile = RadialProfile {
        n,
        m,
        radius,
        lambda,
        t: samples.iter().map(|s| s[0]).collect(),
        v: samples.iter().map(|s| s[1]).collect(),
        dv: samples.iter().map(|s| s[2]).collect(),
    };
    Ok((lambda, profile))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `J_nu(x)` by its power series.
    fn bessel_j(nu: i32, x: f64) -> f64 {
        let mut term = (0.5 * x).powi(nu) / (1..=nu).map(|k| k as f64).product::<f64>();
        let mut sum = term;
        for k in 1..80 {
            term *= -(0.25 * x * x) / (k as f64 * (k + nu) as f64);
            sum += term;
        }
        sum
    }

    fn first_zero(nu: i32, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if bessel_j(nu, lo).signum() == bessel_j(nu, mid).signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn pascal_identity() {
        for n in 1..=2 {
            for m in 1..=n {
                assert_eq!(radial_sigma_m(1.0, 0.0, 0.37, n, m), binomial(n, m));
            }
        }
        assert_eq!(radial_sigma_m(1.0, 0.0, 0.5, 2, 2), 1.0);
        assert_eq!(radial_sigma_m(2.0, 3.0, 0.5, 1, 1), 2.0 + 0.5 * 3.0);
    }

    #[test]
    fn bessel_oracles() {
        let j01 = first_zero(0, 2.0, 3.0);
        let j11 = first_zero(1, 3.5, 4.2);
        let (l1, p1) = radial_eigen_shoot(1, 1, 1.0, 1e-11).unwrap();
        assert!((l1 - j01 * j01 / 4.0).abs() < 1e-8, "{l1}");
        assert!(p1.v.last().unwrap().abs() < 1e-8);
        assert!(p1.dv.iter().all(|&d| d > 0.0));
        let (l2, _) = radial_eigen_shoot(2, 1, 1.0, 1e-10).unwrap();
        assert!((l2 - j11 * j11 / 8.0).abs() < 1e-6, "{l2}");
    }

    #[test]
    fn scaling() {
        for (n, m) in [(1, 1), (2, 2)] {
            let (l1, _) = radial_eigen_shoot(n, m, 1.0, 1e-12).unwrap();
            for r in [0.5, 0.8] {
                let (lr, _) = radial_eigen_shoot(n, m, r, 1e-12).unwrap();
                assert!((lr * r * r - l1).abs() <= 1e-9 * l1, "{n} {m} {r}");
            }
        }
    }

    #[test]
    fn profile_interpolates() {
        let (_, p) = radial_eigen_shoot(2, 2, 1.0, 1e-10).unwrap();
        assert_eq!(p.eval(0.0), -1.0);
        assert_eq!(p.eval(1.5), 0.0);
        let k = p.t.len() / 2;
        assert!((p.eval(p.t[k]) - p.v[k]).abs() < 1e-14);
        assert!(paraboloid_witness(2, 2, 1.0) >= p.lambda);
        assert_eq!(radial_label(2, 2), RadialLabel::Eigenvalue);
        assert_eq!(radial_label(3, 2), RadialLabel::RayleighWitness);
    }
}
