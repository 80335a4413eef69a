//! Small dense and banded solvers used by the micro solvers and the patch
//! propagators. Everything here works on row-major `Vec<f64>` storage.

use crate::error::{Error, Result};

/// Solves a tridiagonal system with the Thomas algorithm.
///
/// `lower[i]` multiplies `x[i-1]` in row `i` (so `lower[0]` is ignored) and
/// `upper[i]` multiplies `x[i+1]` (`upper[n-1]` ignored).
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot == 0.0 || !pivot.is_finite() {
        return Err(Error::Numerical("singular tridiagonal system".into()));
    }
    c[0] = upper[0] / pivot;
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i] * c[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::Numerical(format!("singular tridiagonal system at row {i}")));
        }
        c[i] = upper[i] / pivot;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// Tridiagonal matrix plus a handful of off-band entries, solved with the
/// Woodbury identity (one extra tridiagonal solve per off-band entry).
pub struct BorderedTridiagonal<'a> {
    pub lower: &'a [f64],
    pub diag: &'a [f64],
    pub upper: &'a [f64],
    /// `(row, col, value)` entries added on top of the band.
    pub extra: &'a [(usize, usize, f64)],
}

impl BorderedTridiagonal<'_> {
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let z = solve_tridiagonal(self.lower, self.diag, self.upper, rhs)?;
        if self.extra.is_empty() {
            return Ok(z);
        }
        let n = self.diag.len();
        let k = self.extra.len();
        // A = T + U V^T with U[:, q] = value_q e_row_q and V[:, q] = e_col_q.
        let mut ys = Vec::with_capacity(k);
        for &(row, _, value) in self.extra {
            let mut e = vec![0.0; n];
            e[row] = value;
            ys.push(solve_tridiagonal(self.lower, self.diag, self.upper, &e)?);
        }
        let mut cap = vec![0.0; k * k];
        let mut vz = vec![0.0; k];
        for (p, &(_, col, _)) in self.extra.iter().enumerate() {
            for q in 0..k {
                cap[p * k + q] = ys[q][col] + if p == q { 1.0 } else { 0.0 };
            }
            vz[p] = z[col];
        }
        let coef = solve_dense(&cap, &vz, k)?;
        let mut x = z;
        for (q, y) in ys.iter().enumerate() {
            for i in 0..n {
                x[i] -= y[i] * coef[q];
            }
        }
        Ok(x)
    }
}

/// Gaussian elimination with partial pivoting on an `n x n` row-major matrix.
pub fn solve_dense(a: &[f64], b: &[f64], n: usize) -> Result<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let (piv, best) = (col..n)
            .map(|r| (r, m[r * n + col].abs()))
            .fold((col, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
        if best <= f64::EPSILON * 1e-3 || !best.is_finite() {
            return Err(Error::Numerical(format!("singular dense system (column {col})")));
        }
        if piv != col {
            for j in 0..n {
                m.swap(piv * n + j, col * n + j);
            }
            x.swap(piv, col);
        }
        let p = m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] / p;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                m[r * n + j] -= f * m[col * n + j];
            }
            x[r] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for j in col + 1..n {
            s -= m[col * n + j] * x[j];
        }
        x[col] = s / m[col * n + col];
    }
    Ok(x)
}

pub fn matmul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * m];
    for i in 0..n {
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            for j in 0..m {
                c[i * m + j] += aip * b[p * m + j];
            }
        }
    }
    c
}

pub fn matvec(a: &[f64], x: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    for i in 0..rows {
        let row = &a[i * cols..(i + 1) * cols];
        out[i] = row.iter().zip(x).map(|(r, v)| r * v).sum();
    }
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm(a: &[f64], n: usize) -> Vec<f64> {
    let norm = (0..n)
        .map(|i| (0..n).map(|j| a[i * n + j].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let scaled: Vec<f64> = a.iter().map(|v| v * scale).collect();
    let mut result = identity(n);
    let mut term = identity(n);
    for k in 1..=18 {
        term = matmul(&term, &scaled, n, n, n);
        let inv = 1.0 / k as f64;
        term.iter_mut().for_each(|v| *v *= inv);
        result.iter_mut().zip(&term).for_each(|(r, t)| *r += t);
    }
    for _ in 0..squarings {
        result = matmul(&result, &result, n, n, n);
    }
    result
}

pub fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_matches_dense() {
        let lower = [0.0, -1.0, -1.0, -1.0];
        let diag = [4.0, 4.0, 4.0, 4.0];
        let upper = [-1.0, -1.0, -1.0, 0.0];
        let rhs = [1.0, 2.0, 3.0, 4.0];
        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        let mut dense = vec![0.0; 16];
        for i in 0..4 {
            dense[i * 4 + i] = 4.0;
            if i > 0 {
                dense[i * 4 + i - 1] = -1.0;
            }
            if i < 3 {
                dense[i * 4 + i + 1] = -1.0;
            }
        }
        let y = solve_dense(&dense, &rhs, 4).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn bordered_matches_dense() {
        let n = 6;
        let lower = vec![-1.0; n];
        let diag = vec![3.0; n];
        let upper = vec![-1.0; n];
        let extra = [(0, 4, -0.7), (5, 1, 0.3)];
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = BorderedTridiagonal { lower: &lower, diag: &diag, upper: &upper, extra: &extra }
            .solve(&rhs)
            .unwrap();
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            dense[i * n + i] = 3.0;
            if i > 0 {
                dense[i * n + i - 1] = -1.0;
            }
            if i + 1 < n {
                dense[i * n + i + 1] = -1.0;
            }
        }
        for &(r, c, v) in &extra {
            dense[r * n + c] += v;
        }
        let y = solve_dense(&dense, &rhs, n).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-13, "{a} vs {b}");
        }
    }

    #[test]
    fn singular_dense_is_reported() {
        assert!(solve_dense(&[1.0, 2.0, 2.0, 4.0], &[1.0, 1.0], 2).is_err());
    }

    #[test]
    fn expm_of_diagonal_and_rotation() {
        let d = [-1.0, 0.0, 0.0, 2.0];
        let e = expm(&d, 2);
        assert!((e[0] - (-1.0f64).exp()).abs() < 1e-13);
        assert!((e[3] - 2.0f64.exp()).abs() < 1e-12);
        let t = 1.3;
        let r = [0.0, -t, t, 0.0];
        let e = expm(&r, 2);
        assert!((e[0] - t.cos()).abs() < 1e-13);
        assert!((e[2] - t.sin()).abs() < 1e-13);
    }
}
