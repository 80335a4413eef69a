//! Effective coefficients and constant-coefficient reference solutions.

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::micro::{check_times, rk4, LatticeProblem2D};
use crate::spectral::{wavenumber, Spectral2D};

/// `sqrt(0.21)`: exact effective diffusivity of `1.1 + sin(2 pi y)`.
pub const BENCH_A_STAR: f64 = 0.458_257_569_495_584_04;
/// Published coarse coefficients of the benchmark lattice.
pub const BENCH_A_XX: f64 = 1.2644;
pub const BENCH_A_YY: f64 = 1.3398;

/// Corrector on the periodic unit cell.
///
/// `chi[j]` lives at the node `y = j / n`; the diffusivity samples it was
/// computed from live at the half-nodes `(j + 1/2) / n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSolution {
    pub chi: Vec<f64>,
    pub a_star: Option<f64>,
}

/// Solves `(a (chi' - 1))' = 0` on the periodic cell, i.e. `(a chi')' = a'`,
/// with zero-mean normalisation.
///
/// The periodic operator has constants in its kernel, so `chi` is pinned to
/// zero at node 0, the remaining nodes are solved as a tridiagonal system and
/// the mean is removed afterwards.
pub fn solve_cell_problem(a_half: &[f64]) -> Result<CellSolution> {
    let n = a_half.len();
    if n < 16 {
        return input(format!("cell grid needs at least 16 points, got {n}"));
    }
    if let Some(bad) = a_half.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return input(format!("cell diffusivity must be positive, got {bad}"));
    }
    let dy = 1.0 / n as f64;
    // Row j (1..n): a_{j+1/2}(chi_{j+1} - chi_j) - a_{j-1/2}(chi_j - chi_{j-1}) = dy (a_{j+1/2} - a_{j-1/2})
    let m = n - 1;
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    for r in 0..m {
        let j = r + 1;
        let am = a_half[j - 1];
        let ap = a_half[j];
        lower[r] = am;
        upper[r] = ap;
        diag[r] = -(am + ap);
        rhs[r] = dy * (ap - am);
    }
    let inner = crate::linalg::solve_tridiagonal(&lower, &diag, &upper, &rhs)?;
    let mut chi = Vec::with_capacity(n);
    chi.push(0.0);
    chi.extend(inner);
    let mean = chi.iter().sum::<f64>() / n as f64;
    chi.iter_mut().for_each(|c| *c -= mean);
    Ok(CellSolution { chi, a_star: None })
}

/// `a* = integral of a (1 - chi')` by the periodic midpoint rule; also stored
/// in `cell.a_star`.
pub fn effective_diffusivity(cell: &mut CellSolution, a_half: &[f64]) -> Result<f64> {
    let n = cell.chi.len();
    if a_half.len() != n {
        return input(format!("cell has {n} nodes but {} diffusivity samples", a_half.len()));
    }
    let dy = 1.0 / n as f64;
    let a_star = (0..n)
        .map(|j| a_half[j] * (1.0 - (cell.chi[(j + 1) % n] - cell.chi[j]) / dy) * dy)
        .sum::<f64>();
    cell.a_star = Some(a_star);
    Ok(a_star)
}

/// Residual of the discrete cell equation, max over nodes.
pub fn cell_residual(cell: &CellSolution, a_half: &[f64]) -> f64 {
    let n = cell.chi.len();
    let dy = 1.0 / n as f64;
    let chi = &cell.chi;
    (0..n)
        .map(|j| {
            let jm = (j + n - 1) % n;
            let jp = (j + 1) % n;
            let lhs = a_half[j] * (chi[jp] - chi[j]) - a_half[jm] * (chi[j] - chi[jm]);
            (lhs - dy * (a_half[j] - a_half[jm])).abs() / (dy * dy)
        })
        .fold(0.0, f64::max)
}

/// Effective tensor diagonal of a periodic lattice from its discrete cell
/// problem on one `period x period` tile.
pub fn lattice_effective_diagonal(problem: &LatticeProblem2D) -> Result<(f64, f64)> {
    let p = problem.period;
    let m = p * p;
    let idx = |i: usize, j: usize| (j % p) * p + (i % p);
    let kx = |i: usize, j: usize| problem.kappa_x[(j % p) * problem.n + (i % p)];
    let ky = |i: usize, j: usize| problem.kappa_y[(j % p) * problem.n + (i % p)];
    let mut out = [0.0; 2];
    for (dir, slot) in out.iter_mut().enumerate() {
        let mut a = vec![0.0; m * m];
        let mut b = vec![0.0; m];
        for j in 0..p {
            for i in 0..p {
                let r = idx(i, j);
                // neighbours: (site, bond, unit displacement along dir)
                let nbrs = [
                    (idx(i + 1, j), kx(i, j), if dir == 0 { 1.0 } else { 0.0 }),
                    (idx(i + p - 1, j), kx(i + p - 1, j), if dir == 0 { -1.0 } else { 0.0 }),
                    (idx(i, j + 1), ky(i, j), if dir == 1 { 1.0 } else { 0.0 }),
                    (idx(i, j + p - 1), ky(i, j + p - 1), if dir == 1 { -1.0 } else { 0.0 }),
                ];
                for (c, k, d) in nbrs {
                    a[r * m + c] += k;
                    a[r * m + r] -= k;
                    b[r] -= k * d;
                }
            }
        }
        // pin site 0
        for c in 0..m {
            a[c] = 0.0;
        }
        a[0] = 1.0;
        b[0] = 0.0;
        let chi = crate::linalg::solve_dense(&a, &b, m)?;
        let mut flux = 0.0;
        for j in 0..p {
            for i in 0..p {
                flux += if dir == 0 {
                    kx(i, j) * (1.0 + chi[idx(i + 1, j)] - chi[idx(i, j)])
                } else {
                    ky(i, j) * (1.0 + chi[idx(i, j + 1)] - chi[idx(i, j)])
                };
            }
        }
        *slot = flux / m as f64;
    }
    Ok((out[0], out[1]))
}

/// `u_t = a* u_xx` on `[x_lo, x_hi]` with Dirichlet ends fixed at the initial
/// end values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomogenizedModel1D {
    pub a_star: f64,
    pub x_lo: f64,
    pub x_hi: f64,
}

/// `u_t = a_xx u_xx + a_yy u_yy` on the periodic square.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomogenizedModel2D {
    pub a_xx: f64,
    pub a_yy: f64,
}

impl HomogenizedModel2D {
    pub fn benchmark() -> Self {
        HomogenizedModel2D { a_xx: BENCH_A_XX, a_yy: BENCH_A_YY }
    }
}

/// Node positions of a uniform reference grid with spacing close to `dx`.
pub fn reference_grid(x_lo: f64, x_hi: f64, dx: f64) -> Vec<f64> {
    let n = ((x_hi - x_lo) / dx).round().max(2.0) as usize;
    let h = (x_hi - x_lo) / n as f64;
    (0..=n).map(|i| x_lo + i as f64 * h).collect()
}

/// Method of lines with central differences and RK4 at `dt <= 0.4 dx^2 / (2 a*)`.
/// `u0` is given on the uniform grid spanning the model interval; output
/// snapshots land exactly on `t_grid`.
pub fn solve_homogenized_1d(model: &HomogenizedModel1D, u0: &[f64], t_grid: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = u0.len();
    if n < 3 {
        return input("reference grid needs at least 3 nodes");
    }
    if !(model.a_star > 0.0) {
        return input(format!("a* must be positive, got {}", model.a_star));
    }
    if u0.iter().any(|v| !v.is_finite()) {
        return input("non-finite initial data");
    }
    check_times(t_grid, 0.0)?;
    let dx = (model.x_hi - model.x_lo) / (n - 1) as f64;
    let dt_max = 0.4 * dx * dx / (2.0 * model.a_star);
    let c = model.a_star / (dx * dx);
    let rhs = |u: &[f64], out: &mut [f64]| {
        out[0] = 0.0;
        out[n - 1] = 0.0;
        for i in 1..n - 1 {
            out[i] = c * (u[i - 1] - 2.0 * u[i] + u[i + 1]);
        }
    };
    let mut u = u0.to_vec();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(t_grid.len());
    for &target in t_grid {
        let span = target - t;
        if span > 0.0 {
            let steps = (span / dt_max).ceil() as usize;
            let dt = span / steps as f64;
            for _ in 0..steps {
                u = rk4(&u, dt, rhs);
            }
            t = target;
        }
        out.push(u.clone());
    }
    Ok(out)
}

/// Exact per-mode decay on an `n x n` periodic grid over `[0, 2 pi)^2`.
pub fn solve_homogenized_2d(
    model: &HomogenizedModel2D,
    u0: &[f64],
    n: usize,
    t_grid: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if n == 0 || u0.len() != n * n {
        return Err(Error::Config(format!("field of {} values is not an {n}x{n} periodic grid", u0.len())));
    }
    check_times(t_grid, 0.0)?;
    let fft = Spectral2D::new(n, n);
    let c0 = fft.forward(u0)?;
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let mut c = c0.clone();
        for ky in 0..n {
            let wy = wavenumber(ky, n) as f64;
            for kx in 0..n {
                let wx = wavenumber(kx, n) as f64;
                c[ky * n + kx] *= (-(model.a_xx * wx * wx + model.a_yy * wy * wy) * t).exp();
            }
        }
        out.push(fft.inverse(c)?.0);
    }
    Ok(out)
}
