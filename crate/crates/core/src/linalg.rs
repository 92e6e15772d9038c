//! Sparse linear algebra for the Newton systems: CSR storage, a banded LU
//! for the 2-D grids and ILU(0)-preconditioned BiCGSTAB for the 4-D grids.
//!
//! Every reduction runs in a fixed sequential order so results do not depend
//! on the thread count.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists; columns are sorted and
    /// duplicates summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.nrows {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = s;
        }
    }

    fn bandwidths(&self) -> (usize, usize) {
        let mut lower = 0;
        let mut upper = 0;
        for r in 0..self.nrows {
            for &c in &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]] {
                if c < r {
                    lower = lower.max(r - c);
                } else {
                    upper = upper.max(c - r);
                }
            }
        }
        (lower, upper)
    }
}

/// LU factorization without pivoting in band storage.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    lower: usize,
    upper: usize,
    /// Row-major band: entry (r, c) lives at `r * width + (c + lower - r)`.
    band: Vec<f64>,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows;
        let (lower, upper) = a.bandwidths();
        let width = lower + upper + 1;
        let mut band = vec![0.0; n * width];
        for r in 0..n {
            for k in a.row_ptr[r]..a.row_ptr[r + 1] {
                let c = a.col_idx[k];
                band[r * width + c + lower - r] = a.values[k];
            }
        }
        for k in 0..n {
            let piv = band[k * width + lower];
            if piv == 0.0 || !piv.is_finite() {
                return Err(Error::LinearSolve(format!("zero pivot at row {k}")));
            }
            let rmax = (k + lower).min(n - 1);
            let cmax = (k + upper).min(n - 1);
            for r in k + 1..=rmax {
                let idx = r * width + k + lower - r;
                let l = band[idx] / piv;
                if l == 0.0 {
                    continue;
                }
                band[idx] = l;
                let (head, tail) = band.split_at_mut(r * width);
                let krow = &head[k * width..(k + 1) * width];
                let rrow = &mut tail[..width];
                for c in k + 1..=cmax {
                    rrow[c + lower - r] -= l * krow[c + lower - k];
                }
            }
        }
        Ok(Self {
            n,
            lower,
            upper,
            band,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, lower, upper) = (self.n, self.lower, self.upper);
        let width = lower + upper + 1;
        let mut x = b.to_vec();
        for r in 0..n {
            let c0 = r.saturating_sub(lower);
            let mut s = x[r];
            for c in c0..r {
                s -= self.band[r * width + c + lower - r] * x[c];
            }
            x[r] = s;
        }
        for r in (0..n).rev() {
            let cmax = (r + upper).min(n - 1);
            let mut s = x[r];
            for c in r + 1..=cmax {
                s -= self.band[r * width + c + lower - r] * x[c];
            }
            x[r] = s / self.band[r * width + lower];
        }
        x
    }
}

/// Incomplete LU with the sparsity pattern of `A`.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    m: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let mut m = a.clone();
        let n = m.nrows;
        let mut diag = vec![usize::MAX; n];
        for r in 0..n {
            for k in m.row_ptr[r]..m.row_ptr[r + 1] {
                if m.col_idx[k] == r {
                    diag[r] = k;
                }
            }
            if diag[r] == usize::MAX {
                return Err(Error::LinearSolve(format!("missing diagonal in row {r}")));
            }
        }
        let mut pos = vec![usize::MAX; n];
        for r in 0..n {
            let (start, end) = (m.row_ptr[r], m.row_ptr[r + 1]);
            for k in start..end {
                pos[m.col_idx[k]] = k;
            }
            for k in start..end {
                let c = m.col_idx[k];
                if c >= r {
                    break;
                }
                let piv = m.values[diag[c]];
                if piv == 0.0 {
                    return Err(Error::LinearSolve(format!("ILU(0) zero pivot at row {c}")));
                }
                let l = m.values[k] / piv;
                m.values[k] = l;
                for kk in diag[c] + 1..m.row_ptr[c + 1] {
                    let p = pos[m.col_idx[kk]];
                    if p != usize::MAX {
                        m.values[p] -= l * m.values[kk];
                    }
                }
            }
            for k in start..end {
                pos[m.col_idx[k]] = usize::MAX;
            }
        }
        Ok(Self { m, diag })
    }

    fn apply(&self, b: &[f64], x: &mut [f64]) {
        let m = &self.m;
        let n = m.nrows;
        for r in 0..n {
            let mut s = b[r];
            for k in m.row_ptr[r]..self.diag[r] {
                s -= m.values[k] * x[m.col_idx[k]];
            }
            x[r] = s;
        }
        for r in (0..n).rev() {
            let mut s = x[r];
            for k in self.diag[r] + 1..m.row_ptr[r + 1] {
                s -= m.values[k] * x[m.col_idx[k]];
            }
            x[r] = s / m.values[self.diag[r]];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Right-preconditioned BiCGSTAB. Returns the solution and the iteration count.
pub fn bicgstab(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = a.nrows;
    let pre = Ilu0::new(a)?;
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], 0));
    }
    let mut r = vec![0.0; n];
    a.matvec(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let r_hat = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 0..max_iters {
        if norm(&r) <= tol * bnorm {
            return Ok((x, it));
        }
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 {
            return Err(Error::LinearSolve("BiCGSTAB breakdown (rho = 0)".into()));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        pre.apply(&p, &mut y);
        a.matvec(&y, &mut v);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 {
            return Err(Error::LinearSolve("BiCGSTAB breakdown (r_hat.v = 0)".into()));
        }
        alpha = rho / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) <= tol * bnorm {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            return Ok((x, it + 1));
        }
        pre.apply(&s, &mut z);
        a.matvec(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        if omega == 0.0 {
            return Err(Error::LinearSolve("BiCGSTAB breakdown (omega = 0)".into()));
        }
    }
    let mut ax = vec![0.0; n];
    a.matvec(&x, &mut ax);
    let res = ax.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt() / bnorm;
    Err(Error::LinearSolve(format!(
        "BiCGSTAB did not reach {tol:e} in {max_iters} iterations (relative residual {res:e})"
    )))
}

/// Which method to use for the Newton systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearMethod {
    /// Banded LU on 2-D grids, BiCGSTAB on 4-D grids.
    Auto,
    Banded,
    Bicgstab,
}

/// Solves `A x = b`, reusing a cached banded factorization when `A` is unchanged.
#[derive(Debug, Default)]
pub struct LinearSolver {
    cached: Option<(CsrMatrix, BandedLu)>,
}

impl LinearSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn solve(
        &mut self,
        a: &CsrMatrix,
        b: &[f64],
        method: LinearMethod,
        grid_dim: usize,
        tol: f64,
        max_iters: usize,
    ) -> Result<Vec<f64>> {
        let banded = match method {
            LinearMethod::Auto => grid_dim <= 2,
            LinearMethod::Banded => true,
            LinearMethod::Bicgstab => false,
        };
        if banded {
            let reuse = matches!(&self.cached, Some((m, _)) if m == a);
            if !reuse {
                let lu = BandedLu::factor(a)?;
                self.cached = Some((a.clone(), lu));
            }
            let x = self.cached.as_ref().unwrap().1.solve(b);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::LinearSolve("non-finite solution".into()));
            }
            Ok(x)
        } else {
            bicgstab(a, b, None, tol, max_iters).map(|(x, _)| x)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize, shift: f64) -> CsrMatrix {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, -2.0 - shift)];
                if i > 0 {
                    r.push((i - 1, 1.0));
                }
                if i + 1 < n {
                    r.push((i + 1, 1.3));
                }
                r
            })
            .collect();
        CsrMatrix::from_rows(rows)
    }

    #[test]
    fn banded_and_iterative_agree() {
        let a = laplacian_1d(50, 0.1);
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let x1 = BandedLu::factor(&a).unwrap().solve(&b);
        let (x2, _) = bicgstab(&a, &b, None, 1e-13, 500).unwrap();
        let mut ax = vec![0.0; 50];
        a.matvec(&x1, &mut ax);
        for i in 0..50 {
            assert!((ax[i] - b[i]).abs() < 1e-12);
            assert!((x1[i] - x2[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn duplicates_are_summed() {
        let a = CsrMatrix::from_rows(vec![vec![(1, 1.0), (0, 2.0), (1, 0.5)], vec![(1, 4.0)]]);
        assert_eq!(a.col_idx, vec![0, 1, 1]);
        assert_eq!(a.values, vec![2.0, 1.5, 4.0]);
    }

    #[test]
    fn zero_pivot_reported() {
        let a = CsrMatrix::from_rows(vec![vec![(0, 0.0), (1, 1.0)], vec![(0, 1.0), (1, 1.0)]]);
        assert!(matches!(BandedLu::factor(&a), Err(Error::LinearSolve(_))));
    }
}
