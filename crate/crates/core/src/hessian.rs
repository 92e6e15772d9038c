//! Discrete complex Hessian, its spectrum, elementary symmetric functions,
//! the Gamma_m cone and the linearization of `sigma_m^{1/m}`.
//!
//! For n = 1 the Hessian is the scalar `u_{z zbar} = (u_xx + u_yy) / 4`.
//! For n = 2 it is the 2x2 Hermitian matrix
//! `u_{j kbar} = ((u_{x_j x_k} + u_{y_j y_k}) + i (u_{x_j y_k} - u_{y_j x_k})) / 4`,
//! assembled from directional second differences (see [`crate::geometry`]).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{Grid, NO_NODE};

/// Hermitian n x n matrix for n <= 2, stored as its real diagonal and the
/// (1, 2) entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermitianMatrix {
    n: usize,
    diag: [f64; 2],
    off: Complex64,
}

impl HermitianMatrix {
    pub fn new(n: usize, diag: [f64; 2], off: Complex64) -> Self {
        assert!(n == 1 || n == 2, "HermitianMatrix supports n = 1, 2");
        if n == 1 {
            Self {
                n,
                diag: [diag[0], 0.0],
                off: Complex64::new(0.0, 0.0),
            }
        } else {
            Self { n, diag, off }
        }
    }

    pub fn scalar(a: f64) -> Self {
        Self::new(1, [a, 0.0], Complex64::new(0.0, 0.0))
    }

    pub fn identity(n: usize) -> Self {
        Self::new(n, [1.0, 1.0], Complex64::new(0.0, 0.0))
    }

    pub fn diagonal(values: &[f64]) -> Self {
        match values.len() {
            1 => Self::scalar(values[0]),
            2 => Self::new(2, [values[0], values[1]], Complex64::new(0.0, 0.0)),
            k => panic!("unsupported size {k}"),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        match (i, j) {
            (0, 0) => self.diag[0].into(),
            (1, 1) => self.diag[1].into(),
            (0, 1) => self.off,
            (1, 0) => self.off.conj(),
            _ => panic!("index out of range"),
        }
    }

    pub fn trace(&self) -> f64 {
        self.diag[..self.n].iter().sum()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(self.n, [c * self.diag[0], c * self.diag[1]], self.off * c)
    }

    /// `t * self + (1 - t) * other`.
    pub fn lerp(&self, other: &Self, t: f64) -> Self {
        Self::new(
            self.n,
            [
                t * self.diag[0] + (1.0 - t) * other.diag[0],
                t * self.diag[1] + (1.0 - t) * other.diag[1],
            ],
            self.off * t + other.off * (1.0 - t),
        )
    }

    /// Eigen-decomposition: descending eigenvalues with unit eigenvectors.
    fn eigen(&self) -> ([f64; 2], [[Complex64; 2]; 2]) {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        if self.n == 1 {
            return ([self.diag[0], 0.0], [[one, zero], [zero, one]]);
        }
        let (a, d, b) = (self.diag[0], self.diag[1], self.off);
        let mean = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        let l1 = mean + rad;
        let l2 = mean - rad;
        let c1 = [b, Complex64::new(l1 - a, 0.0)];
        let c2 = [Complex64::new(l1 - d, 0.0), b.conj()];
        let n1 = c1[0].norm_sqr() + c1[1].norm_sqr();
        let n2 = c2[0].norm_sqr() + c2[1].norm_sqr();
        let (v, nv) = if n1 >= n2 { (c1, n1) } else { (c2, n2) };
        let v1 = if nv > 0.0 {
            let s = 1.0 / nv.sqrt();
            [v[0] * s, v[1] * s]
        } else {
            [one, zero]
        };
        let v2 = [-v1[1].conj(), v1[0].conj()];
        ([l1, l2], [v1, v2])
    }
}

/// Eigenvalues `Lambda_1 >= ... >= Lambda_n` of a complex Hessian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianSpectrum {
    n: usize,
    values: [f64; 2],
}

impl HessianSpectrum {
    /// Sorts the given eigenvalues descending.
    pub fn from_values(values: &[f64]) -> Self {
        assert!(values.len() == 1 || values.len() == 2);
        let mut v = [values[0], *values.get(1).unwrap_or(&0.0)];
        if values.len() == 2 && v[1] > v[0] {
            v.swap(0, 1);
        }
        Self {
            n: values.len(),
            values: v,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values[..self.n]
    }
}

/// Symmetrized copy of a possibly non-Hermitian 2x2 complex matrix.
pub fn symmetrize(n: usize, m: [[Complex64; 2]; 2]) -> HermitianMatrix {
    let off = 0.5 * (m[0][1] + m[1][0].conj());
    HermitianMatrix::new(n, [m[0][0].re, m[1][1].re], off)
}

/// Assembles the complex Hessian from directional second differences.
pub fn hessian_from_directional(n: usize, dd: &[f64]) -> HermitianMatrix {
    if n == 1 {
        return HermitianMatrix::scalar(0.25 * (dd[0] + dd[1]));
    }
    let mixed = |p: usize| 0.25 * (dd[4 + 2 * p] - dd[5 + 2 * p]);
    let re = 0.25 * (mixed(0) + mixed(1));
    let im = 0.25 * (mixed(2) - mixed(3));
    HermitianMatrix::new(
        2,
        [0.25 * (dd[0] + dd[1]), 0.25 * (dd[2] + dd[3])],
        Complex64::new(re, im),
    )
}

/// Coefficients `c_d` with `tr(F dH) = sum_d c_d dD_d` for a Hermitian `F`.
pub fn directional_coefficients(f: &HermitianMatrix, out: &mut [f64]) {
    if f.n == 1 {
        out[0] = 0.25 * f.diag[0];
        out[1] = 0.25 * f.diag[0];
        return;
    }
    out[0] = 0.25 * f.diag[0];
    out[1] = 0.25 * f.diag[0];
    out[2] = 0.25 * f.diag[1];
    out[3] = 0.25 * f.diag[1];
    let coef_mixed = [
        0.5 * f.off.re,
        0.5 * f.off.re,
        0.5 * f.off.im,
        -0.5 * f.off.im,
    ];
    for (p, c) in coef_mixed.iter().enumerate() {
        out[4 + 2 * p] = 0.25 * c;
        out[5 + 2 * p] = -0.25 * c;
    }
}

/// Directional second differences of interior values `u` at interior node `i`.
pub(crate) fn directional_second_differences(grid: &Grid, u: &[f64], i: usize, out: &mut [f64]) {
    let u0 = u[i];
    for (o, s) in out.iter_mut().zip(grid.stencil(i)) {
        let up = if s.plus == NO_NODE { 0.0 } else { u[s.plus as usize] };
        let um = if s.minus == NO_NODE { 0.0 } else { u[s.minus as usize] };
        *o = s.wc * u0 + s.wp * up + s.wm * um;
    }
}

/// Complex Hessian of interior values `u` at interior node `i`.
pub(crate) fn hessian_at(grid: &Grid, u: &[f64], i: usize) -> HermitianMatrix {
    let mut dd = [0.0; 12];
    let nd = grid.directions().len();
    directional_second_differences(grid, u, i, &mut dd[..nd]);
    hessian_from_directional(grid.n(), &dd[..nd])
}

/// Complex Hessian `[u_{j kbar}]` of a field at a node (flat numbering).
/// Values across the boundary are taken to be 0.
pub fn complex_hessian(u: &ScalarField, node: usize) -> Result<HermitianMatrix> {
    let grid = u.grid();
    let i = grid.interior_index(node).ok_or(Error::NotInterior(node))?;
    let vals = u.interior_values();
    Ok(hessian_at(grid, &vals, i))
}

/// Complex Hessians of a field at every interior node.
pub fn hessian_field(u: &ScalarField) -> Vec<HermitianMatrix> {
    let grid = u.grid();
    let vals = u.interior_values();
    (0..grid.interior_count())
        .map(|i| hessian_at(grid, &vals, i))
        .collect()
}

pub fn spectrum(h: &HermitianMatrix) -> HessianSpectrum {
    let (l, _) = h.eigen();
    HessianSpectrum::from_values(&l[..h.n])
}

/// Elementary symmetric polynomial of a slice, `e_0 = 1`.
pub(crate) fn elementary(values: &[f64], k: usize) -> f64 {
    match (values.len(), k) {
        (_, 0) => 1.0,
        (1, 1) => values[0],
        (2, 1) => values[0] + values[1],
        (2, 2) => values[0] * values[1],
        (len, k) if k > len => 0.0,
        _ => {
            // General recurrence, unused for n <= 2.
            let mut e = vec![0.0; k + 1];
            e[0] = 1.0;
            for &v in values {
                for j in (1..=k).rev() {
                    e[j] += v * e[j - 1];
                }
            }
            e[k]
        }
    }
}

pub fn sigma_k(s: &HessianSpectrum, k: usize) -> Result<f64> {
    if k == 0 || k > s.n {
        return Err(Error::KOutOfRange { k, n: s.n });
    }
    Ok(elementary(s.values(), k))
}

/// True iff `sigma_k(s) > slack` for all `k = 1..=m`.
pub fn in_gamma_m(s: &HessianSpectrum, m: usize, slack: f64) -> bool {
    (1..=m).all(|k| elementary(s.values(), k) > slack)
}

/// `min_{k <= m} sigma_k(s)`: positive iff the spectrum lies in Gamma_m.
pub fn cone_slack(s: &HessianSpectrum, m: usize) -> f64 {
    (1..=m)
        .map(|k| elementary(s.values(), k))
        .fold(f64::INFINITY, f64::min)
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Hermitian `F` with `d sigma_m^{1/m}(H) = tr(F dH)`.
///
/// In the eigenframe `F` is diagonal with entries
/// `(1/m) sigma_m^{1/m - 1} sigma_{m-1}(Lambda | i)`.
pub fn sigma_m_linearization(h: &HermitianMatrix, m: usize) -> Result<HermitianMatrix> {
    let (l, v) = h.eigen();
    let n = h.n;
    let s = HessianSpectrum::from_values(&l[..n]);
    if m == 0 || m > n || !in_gamma_m(&s, m, 0.0) {
        return Err(Error::OutsideCone {
            op: "hessian_core::sigma_m_linearization",
            m,
        });
    }
    let sm = elementary(&l[..n], m);
    let pref = sm.powf(1.0 / m as f64 - 1.0) / m as f64;
    Ok(eigenframe_matrix(n, &v, |i| {
        let rest: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| l[j]).collect();
        pref * elementary(&rest, m - 1)
    }))
}

/// Hermitian `F` with `d sigma_m(H) = tr(F dH)`; valid everywhere.
pub fn sigma_m_gradient(h: &HermitianMatrix, m: usize) -> HermitianMatrix {
    let (l, v) = h.eigen();
    let n = h.n;
    eigenframe_matrix(n, &v, |i| {
        let rest: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| l[j]).collect();
        elementary(&rest, m - 1)
    })
}

fn eigenframe_matrix(n: usize, v: &[[Complex64; 2]; 2], g: impl Fn(usize) -> f64) -> HermitianMatrix {
    if n == 1 {
        return HermitianMatrix::scalar(g(0));
    }
    let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (k, vk) in v.iter().enumerate() {
        let gk = g(k);
        for r in 0..2 {
            for c in 0..2 {
                m[r][c] += vk[r] * vk[c].conj() * gk;
            }
        }
    }
    symmetrize(2, m)
}

/// `sigma_1 / n - (sigma_m / C(n, m))^{1/m}`, nonnegative on Gamma_m.
pub fn maclaurin_gap(s: &HessianSpectrum, m: usize) -> Result<f64> {
    if m == 0 || m > s.n || !in_gamma_m(s, m, 0.0) {
        return Err(Error::OutsideCone {
            op: "hessian_core::maclaurin_gap",
            m,
        });
    }
    let n = s.n;
    let s1 = elementary(s.values(), 1);
    let sm = elementary(s.values(), m);
    Ok(s1 / n as f64 - (sm / binomial(n, m)).powf(1.0 / m as f64))
}
