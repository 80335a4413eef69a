//! Fully resolved fine-scale solvers.
//!
//! The 1D solver works on a vertex-centred grid with the diffusivity sampled
//! at half-nodes, so the flux form is discretely conservative. The 2D solver
//! advances a heterogeneous lattice whose bond diffusivities repeat with a
//! small period in both directions.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{config, input, Error, Result};
use crate::linalg::{solve_tridiagonal, BorderedTridiagonal};

/// A periodic diffusivity `a(y)` with unit period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diffusivity {
    Constant { value: f64 },
    /// `mean + amplitude * sin(2 pi y)`
    Sinusoidal { mean: f64, amplitude: f64 },
    /// Uniform samples at `y = j / n`, interpolated linearly with wrap-around.
    Table { samples: Vec<f64> },
}

impl Diffusivity {
    /// The benchmark medium `1.1 + sin(2 pi y)`.
    pub fn benchmark() -> Self {
        Diffusivity::Sinusoidal { mean: 1.1, amplitude: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Diffusivity::Constant { value } if !(*value > 0.0 && value.is_finite()) => {
                input(format!("diffusivity must be positive, got {value}"))
            }
            Diffusivity::Sinusoidal { mean, amplitude }
                if !(mean - amplitude.abs() > 0.0 && mean.is_finite() && amplitude.is_finite()) =>
            {
                input(format!("sinusoidal diffusivity {mean} +- {amplitude} is not positive"))
            }
            Diffusivity::Table { samples } => {
                if samples.len() < 2 {
                    return input("diffusivity table needs at least two samples");
                }
                if let Some(bad) = samples.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                    return input(format!("diffusivity table has non-positive entry {bad}"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Evaluates `a(y)`; `y` is in cell units and may be any real number.
    pub fn eval(&self, y: f64) -> f64 {
        match self {
            Diffusivity::Constant { value } => *value,
            Diffusivity::Sinusoidal { mean, amplitude } => mean + amplitude * (2.0 * PI * y).sin(),
            Diffusivity::Table { samples } => {
                let n = samples.len();
                let s = y.rem_euclid(1.0) * n as f64;
                let j = (s.floor() as usize).min(n - 1);
                let w = s - j as f64;
                (1.0 - w) * samples[j] + w * samples[(j + 1) % n]
            }
        }
    }

    /// Samples at the half-nodes `(j + 1/2) / n` of an `n`-point unit cell.
    pub fn cell_samples(&self, n: usize) -> Vec<f64> {
        (0..n).map(|j| self.eval((j as f64 + 0.5) / n as f64)).collect()
    }
}

/// Condition imposed at one end of a 1D micro domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Boundary {
    Dirichlet { value: f64 },
    /// Prescribed `a du/dx` at the end point. Zero means no flux.
    Neumann { flux: f64 },
    /// The mean slope over the first (or last) `nodes` grid intervals equals
    /// `slope`. With `nodes * dx` equal to one medium period this imposes a
    /// macroscopic gradient without pinning the fine-scale oscillation.
    PeriodSlope { slope: f64, nodes: usize },
}

impl Boundary {
    fn validate(&self, n: usize) -> Result<()> {
        let (v, label) = match *self {
            Boundary::Dirichlet { value } => (value, "dirichlet value"),
            Boundary::Neumann { flux } => (flux, "neumann flux"),
            Boundary::PeriodSlope { slope, nodes } => {
                if nodes == 0 || nodes >= n {
                    return input(format!("period-slope span {nodes} does not fit {n} nodes"));
                }
                (slope, "slope")
            }
        };
        if v.is_finite() {
            Ok(())
        } else {
            input(format!("non-finite {label}"))
        }
    }
}

/// Heterogeneous diffusion `u_t = (a(x/eps) u_x)_x` on `[x_lo, x_hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetailedProblem1D {
    pub diffusivity: Diffusivity,
    pub epsilon: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    pub left: Boundary,
    pub right: Boundary,
}

impl DetailedProblem1D {
    pub fn validate(&self) -> Result<()> {
        self.diffusivity.validate()?;
        if !(self.epsilon > 0.0) {
            return input(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.x_hi > self.x_lo) {
            return input("domain length must be positive");
        }
        Ok(())
    }
}

/// Fine-grid state: nodes `x0 + i dx`.
#[derive(Clone, Debug, PartialEq)]
pub struct MicroState1D {
    pub x0: f64,
    pub dx: f64,
    pub values: Vec<f64>,
    pub time: f64,
}

impl MicroState1D {
    pub fn new(x0: f64, dx: f64, values: Vec<f64>, time: f64) -> Result<Self> {
        let s = MicroState1D { x0, dx, values, time };
        s.validate()?;
        Ok(s)
    }

    /// Samples `f` on `n` nodes starting at `x0`.
    pub fn sample(x0: f64, dx: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..n).map(|i| f(x0 + i as f64 * dx)).collect();
        MicroState1D { x0, dx, values, time: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn x_end(&self) -> f64 {
        self.x(self.len() - 1)
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }

    /// Trapezoid-weighted integral of the nodal values.
    pub fn mass(&self) -> f64 {
        let n = self.len();
        let inner: f64 = self.values[1..n - 1].iter().sum();
        self.dx * (inner + 0.5 * (self.values[0] + self.values[n - 1]))
    }

    fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0) {
            return input(format!("grid spacing must be positive, got {}", self.dx));
        }
        if self.values.len() < 3 {
            return input(format!("need at least 3 nodes, got {}", self.values.len()));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return input(format!("non-finite micro value at node {i}"));
        }
        Ok(())
    }
}

/// Diffusivity at every half-node of the state's grid.
pub fn sample_diffusivity(problem: &DetailedProblem1D, state: &MicroState1D) -> Result<Vec<f64>> {
    let tol = 1e-9 * (problem.x_hi - problem.x_lo).max(state.dx);
    if state.x0 < problem.x_lo - tol || state.x_end() > problem.x_hi + tol {
        return Err(Error::Geometry(format!(
            "grid [{}, {}] lies outside the domain [{}, {}]",
            state.x0,
            state.x_end(),
            problem.x_lo,
            problem.x_hi
        )));
    }
    Ok(half_node_diffusivity(&problem.diffusivity, problem.epsilon, state.x0, state.dx, state.len()))
}

pub(crate) fn half_node_diffusivity(a: &Diffusivity, epsilon: f64, x0: f64, dx: f64, n: usize) -> Vec<f64> {
    (0..n - 1).map(|i| a.eval((x0 + (i as f64 + 0.5) * dx) / epsilon)).collect()
}

/// One theta-scheme step of the conservative central discretisation.
///
/// `a_half[i]` sits between nodes `i` and `i + 1`. Neumann ends use a half
/// control volume, so with zero flux the trapezoid mass is conserved.
pub fn step_micro_1d(
    state: &MicroState1D,
    a_half: &[f64],
    left: Boundary,
    right: Boundary,
    dt: f64,
    theta: f64,
) -> Result<MicroState1D> {
    state.validate()?;
    let n = state.len();
    if a_half.len() != n - 1 {
        return input(format!("expected {} half-node diffusivities, got {}", n - 1, a_half.len()));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return input(format!("time step must be positive, got {dt}"));
    }
    if !(0.0..=1.0).contains(&theta) {
        return input(format!("theta must lie in [0, 1], got {theta}"));
    }
    left.validate(n)?;
    right.validate(n)?;
    debug_assert!(a_half.iter().all(|a| *a > 0.0));

    let dx = state.dx;
    let u = &state.values;
    let mut lower = vec![0.0; n];
    let mut diag = vec![1.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut extra = Vec::new();

    for i in 0..n {
        let (alpha, beta, source) = if i == 0 {
            match left {
                Boundary::Neumann { flux } => (0.0, 2.0 * a_half[0] / (dx * dx), -2.0 * flux / dx),
                Boundary::Dirichlet { value } => {
                    rhs[0] = value;
                    continue;
                }
                Boundary::PeriodSlope { slope, nodes } => {
                    extra.push((0, nodes, -1.0));
                    rhs[0] = -slope * nodes as f64 * dx;
                    continue;
                }
            }
        } else if i == n - 1 {
            match right {
                Boundary::Neumann { flux } => (2.0 * a_half[n - 2] / (dx * dx), 0.0, 2.0 * flux / dx),
                Boundary::Dirichlet { value } => {
                    rhs[i] = value;
                    continue;
                }
                Boundary::PeriodSlope { slope, nodes } => {
                    extra.push((i, i - nodes, -1.0));
                    rhs[i] = slope * nodes as f64 * dx;
                    continue;
                }
            }
        } else {
            (a_half[i - 1] / (dx * dx), a_half[i] / (dx * dx), 0.0)
        };
        let um = if i > 0 { u[i - 1] } else { 0.0 };
        let up = if i + 1 < n { u[i + 1] } else { 0.0 };
        let lu = alpha * um - (alpha + beta) * u[i] + beta * up;
        lower[i] = -theta * dt * alpha;
        upper[i] = -theta * dt * beta;
        diag[i] = 1.0 + theta * dt * (alpha + beta);
        rhs[i] = u[i] + (1.0 - theta) * dt * lu + dt * source;
    }

    // Rows fixed by a period-slope condition are coupled to a node up to a
    // period away, which the band cannot hold.
    let values = if extra.is_empty() {
        solve_tridiagonal(&lower, &diag, &upper, &rhs)?
    } else {
        for &(row, col, _) in &extra {
            if col.abs_diff(row) == 1 {
                return input("period-slope span must exceed one grid interval");
            }
        }
        BorderedTridiagonal { lower: &lower, diag: &diag, upper: &upper, extra: &extra }.solve(&rhs)?
    };
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("micro step produced non-finite value at node {i}")));
    }
    Ok(MicroState1D { x0: state.x0, dx, values, time: state.time + dt })
}

/// Crank-Nicolson integration of the detailed problem, returning one state
/// per requested output time. Internal steps never exceed `max_dt`.
pub fn solve_detailed_1d(
    problem: &DetailedProblem1D,
    u0: &MicroState1D,
    t_grid: &[f64],
    max_dt: f64,
) -> Result<Vec<MicroState1D>> {
    problem.validate()?;
    u0.validate()?;
    if u0.dx > problem.epsilon / 20.0 * (1.0 + 1e-12) {
        return config(format!(
            "grid spacing {} does not resolve epsilon {} (need dx <= eps/20)",
            u0.dx, problem.epsilon
        ));
    }
    if !(max_dt > 0.0) {
        return input("max_dt must be positive");
    }
    check_times(t_grid, u0.time)?;
    let a_half = sample_diffusivity(problem, u0)?;
    let mut out = Vec::with_capacity(t_grid.len());
    let mut state = u0.clone();
    for &t in t_grid {
        let span = t - state.time;
        if span > 0.0 {
            let steps = (span / max_dt).ceil().max(1.0) as usize;
            let dt = span / steps as f64;
            for _ in 0..steps {
                state = step_micro_1d(&state, &a_half, problem.left, problem.right, dt, 0.5)?;
            }
            state.time = t;
        }
        out.push(state.clone());
    }
    Ok(out)
}

pub(crate) fn check_times(t_grid: &[f64], t0: f64) -> Result<()> {
    let mut prev = t0;
    for (k, &t) in t_grid.iter().enumerate() {
        if !t.is_finite() || t < prev || (k > 0 && t <= prev) {
            return input(format!("output times must be increasing and start at or after {t0}"));
        }
        prev = t;
    }
    Ok(())
}

/// Bond diffusivities of the benchmark lattice, one period in each direction.
/// Indexed `[row % 3][col % 3]` with rows along `y`.
pub const BENCH_TILE_X_BONDS: [[f64; 3]; 3] =
    [[3.6355, 0.4470, 2.3896], [0.8628, 4.8558, 0.2833], [4.5025, 1.5865, 0.5679]];
/// Bonds between `(i, j)` and `(i, j + 1)`.
pub const BENCH_TILE_Y_BONDS: [[f64; 3]; 3] =
    [[1.0566, 0.6668, 1.1568], [6.5894, 0.8683, 2.4174], [0.9473, 1.1407, 1.6610]];

/// Heterogeneous lattice on the bi-periodic square `[0, 2 pi)^2`.
///
/// Fields are stored row-major, `u[j * n + i]` with `i` along `x`.
/// `kappa_x[j * n + i]` couples `(i, j)` to `(i + 1, j)` and `kappa_y[j * n + i]`
/// couples `(i, j)` to `(i, j + 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeProblem2D {
    pub n: usize,
    pub period: usize,
    pub kappa_x: Vec<f64>,
    pub kappa_y: Vec<f64>,
}

/// Time integrator for the lattice ODE.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeScheme {
    Rk4,
    BackwardEuler,
}

impl LatticeProblem2D {
    /// Builds the lattice by tiling `period x period` tables of bond values.
    pub fn from_tiles(n: usize, period: usize, tile_x: &[f64], tile_y: &[f64]) -> Result<Self> {
        if period == 0 || n == 0 || n % period != 0 {
            return Err(Error::Geometry(format!("lattice size {n} is not a multiple of period {period}")));
        }
        if tile_x.len() != period * period || tile_y.len() != period * period {
            return input("tile tables must hold period^2 entries");
        }
        if tile_x.iter().chain(tile_y).any(|k| !(*k > 0.0 && k.is_finite())) {
            return input("bond diffusivities must be positive");
        }
        let mut kappa_x = vec![0.0; n * n];
        let mut kappa_y = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                let t = (j % period) * period + i % period;
                kappa_x[j * n + i] = tile_x[t];
                kappa_y[j * n + i] = tile_y[t];
            }
        }
        Ok(LatticeProblem2D { n, period, kappa_x, kappa_y })
    }

    /// The benchmark medium on an `n x n` lattice.
    pub fn benchmark(n: usize) -> Result<Self> {
        let tx: Vec<f64> = BENCH_TILE_X_BONDS.iter().flatten().copied().collect();
        let ty: Vec<f64> = BENCH_TILE_Y_BONDS.iter().flatten().copied().collect();
        Self::from_tiles(n, 3, &tx, &ty)
    }

    pub fn uniform(n: usize, kappa: f64) -> Result<Self> {
        Self::from_tiles(n, 1, &[kappa], &[kappa])
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn max_kappa(&self) -> f64 {
        self.kappa_x.iter().chain(&self.kappa_y).copied().fold(0.0, f64::max)
    }

    /// Largest explicit step, `h^2 / (4 max kappa)`.
    pub fn stable_dt(&self) -> f64 {
        let h = self.spacing();
        h * h / (4.0 * self.max_kappa())
    }

    /// Bond to the right of global site `(i, j)`; indices wrap.
    pub fn kx(&self, i: isize, j: isize) -> f64 {
        let n = self.n as isize;
        self.kappa_x[(j.rem_euclid(n) * n + i.rem_euclid(n)) as usize]
    }

    /// Bond above global site `(i, j)`; indices wrap.
    pub fn ky(&self, i: isize, j: isize) -> f64 {
        let n = self.n as isize;
        self.kappa_y[(j.rem_euclid(n) * n + i.rem_euclid(n)) as usize]
    }

    /// Right-hand side of the fully periodic lattice ODE.
    pub fn rhs(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        let inv_h2 = 1.0 / (self.spacing() * self.spacing());
        for j in 0..n {
            let jm = (j + n - 1) % n;
            let jp = (j + 1) % n;
            for i in 0..n {
                let im = (i + n - 1) % n;
                let ip = (i + 1) % n;
                let c = u[j * n + i];
                let f = self.kappa_x[j * n + i] * (u[j * n + ip] - c)
                    + self.kappa_x[j * n + im] * (u[j * n + im] - c)
                    + self.kappa_y[j * n + i] * (u[jp * n + i] - c)
                    + self.kappa_y[jm * n + i] * (u[jm * n + i] - c);
                out[j * n + i] = f * inv_h2;
            }
        }
    }
}

/// One step of the fully periodic lattice ODE.
pub fn step_lattice_2d(u: &[f64], problem: &LatticeProblem2D, dt: f64, scheme: LatticeScheme) -> Result<Vec<f64>> {
    let n = problem.n;
    if u.len() != n * n {
        return input(format!("field has {} values, lattice needs {}", u.len(), n * n));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return input(format!("time step must be positive, got {dt}"));
    }
    match scheme {
        LatticeScheme::Rk4 => {
            if dt > problem.stable_dt() * (1.0 + 1e-12) {
                return config(format!(
                    "explicit step {dt} exceeds the stability bound {}",
                    problem.stable_dt()
                ));
            }
            Ok(rk4(u, dt, |v, out| problem.rhs(v, out)))
        }
        LatticeScheme::BackwardEuler => backward_euler_cg(u, problem, dt),
    }
}

/// Classical RK4 for an autonomous system.
pub(crate) fn rk4(u: &[f64], dt: f64, mut f: impl FnMut(&[f64], &mut [f64])) -> Vec<f64> {
    let m = u.len();
    let mut k1 = vec![0.0; m];
    let mut k2 = vec![0.0; m];
    let mut k3 = vec![0.0; m];
    let mut k4 = vec![0.0; m];
    let mut tmp = vec![0.0; m];
    f(u, &mut k1);
    for i in 0..m {
        tmp[i] = u[i] + 0.5 * dt * k1[i];
    }
    f(&tmp, &mut k2);
    for i in 0..m {
        tmp[i] = u[i] + 0.5 * dt * k2[i];
    }
    f(&tmp, &mut k3);
    for i in 0..m {
        tmp[i] = u[i] + dt * k3[i];
    }
    f(&tmp, &mut k4);
    (0..m).map(|i| u[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
}

// (I - dt L) v = u with conjugate gradients; L is symmetric negative semidefinite.
fn backward_euler_cg(u: &[f64], problem: &LatticeProblem2D, dt: f64) -> Result<Vec<f64>> {
    let m = u.len();
    let apply = |v: &[f64], out: &mut [f64]| {
        problem.rhs(v, out);
        for i in 0..m {
            out[i] = v[i] - dt * out[i];
        }
    };
    let mut x = u.to_vec();
    let mut r = vec![0.0; m];
    apply(&x, &mut r);
    for i in 0..m {
        r[i] = u[i] - r[i];
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; m];
    let norm_b = dot(u, u).sqrt().max(1e-300);
    let mut rr = dot(&r, &r);
    for _ in 0..10 * m + 100 {
        if rr.sqrt() <= 1e-13 * norm_b {
            return Ok(x);
        }
        apply(&p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..m {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..m {
            p[i] = r[i] + beta * p[i];
        }
    }
    Err(Error::Numerical("conjugate gradients did not converge".into()))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
