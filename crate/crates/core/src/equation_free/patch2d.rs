//! Gap-tooth simulation of the heterogeneous lattice on square patches.
//!
//! Every patch is a `core x core` block of lattice sites surrounded by a ring
//! of ghost sites one site wide. Ghosts are refreshed from a tensor-product
//! quadratic fitted to the 3x3 neighbourhood of patch averages.

use serde::{Deserialize, Serialize};

use super::patch1d::whole_steps;
use super::{Snapshot, SnapshotSeries, BLOW_UP};
use crate::error::{config, input, Error, Result};
use crate::field::{MacroField, MacroGrid};
use crate::linalg::{expm, matmul, solve_dense};
use crate::micro::LatticeProblem2D;

/// How ghost sites are filled from the macro field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GhostCoupling {
    /// Ghost value is the macro interpolant at the ghost site.
    Dirichlet,
    /// Ghost value copies the core site one medium period inward and adds the
    /// interpolant's increment over that period. The fine-scale oscillation
    /// then carries across the patch edge while the macro gradient is imposed.
    PeriodJump,
}

/// Micro integrator for the patch interiors; ghosts stay frozen between
/// refreshes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PatchStepper {
    /// Explicit RK4 at the lattice stability bound, refreshing ghosts every
    /// `refresh_every` steps.
    Rk4 { refresh_every: usize },
    /// Exact propagation of the patch ODE over `dt` with ghosts refreshed at
    /// the start of each step.
    Exponential { dt: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PatchGrid2D {
    pub lattice: LatticeProblem2D,
    /// Patches per side.
    pub patches: usize,
    /// Core sites per side.
    pub core: usize,
    pub coupling: GhostCoupling,
}

#[derive(Clone, Copy, Debug)]
struct Ghost {
    /// local site, `-1..=core` on each axis
    a: isize,
    b: isize,
    /// outward normal
    nx: isize,
    ny: isize,
}

impl PatchGrid2D {
    pub fn validate(&self) -> Result<()> {
        let n = self.lattice.n;
        let p = self.lattice.period;
        if self.patches == 0 || n % self.patches != 0 {
            return Err(Error::Geometry(format!("{} patches do not divide a {n}-site lattice", self.patches)));
        }
        let s = self.stride();
        if s % p != 0 {
            return Err(Error::Geometry(format!("patch stride {s} is not a multiple of the medium period {p}")));
        }
        if self.core < 2 || self.core + 2 > s {
            return config(format!("core of {} sites does not fit a stride of {s}", self.core));
        }
        if self.coupling == GhostCoupling::PeriodJump && self.core <= p {
            return config(format!("period-jump coupling needs a core wider than the period {p}"));
        }
        if self.footprint() >= 0.1 {
            return config(format!("patches cover {:.1}% of the domain", 100.0 * self.footprint()));
        }
        Ok(())
    }

    pub fn stride(&self) -> usize {
        self.lattice.n / self.patches
    }

    /// Lattice offset of the first core site inside each stride.
    pub fn core_start(&self) -> usize {
        self.stride() / 2 - self.core / 2
    }

    /// Area fraction simulated, ghost rings included.
    pub fn footprint(&self) -> f64 {
        let w = (self.core + 2) as f64 * self.patches as f64;
        (w * w) / (self.lattice.n * self.lattice.n) as f64
    }

    pub fn macro_grid(&self) -> MacroGrid {
        let h = self.lattice.spacing();
        let origin = (self.core_start() as f64 + 0.5 * (self.core - 1) as f64) * h;
        MacroGrid::Torus { n: self.patches, origin }
    }

    /// Global lattice index of local site `a` along an axis in patch `i`.
    pub fn site(&self, i: usize, a: isize) -> isize {
        (i * self.stride() + self.core_start()) as isize + a
    }

    fn ghosts(&self) -> Vec<Ghost> {
        let c = self.core as isize;
        let mut g = Vec::with_capacity(4 * self.core);
        for b in 0..c {
            g.push(Ghost { a: -1, b, nx: -1, ny: 0 });
            g.push(Ghost { a: c, b, nx: 1, ny: 0 });
        }
        for a in 0..c {
            g.push(Ghost { a, b: -1, nx: 0, ny: -1 });
            g.push(Ghost { a, b: c, nx: 0, ny: 1 });
        }
        g
    }

    /// Global lattice coordinates of the ghost ring of patch `(i, j)`, in the
    /// order used by [`patch_edge_values_2d`].
    pub fn ghost_sites(&self, i: usize, j: usize) -> Vec<(isize, isize)> {
        self.ghosts().iter().map(|g| (self.site(i, g.a), self.site(j, g.b))).collect()
    }

    // Offset in lattice units from the patch centre.
    fn offset(&self, a: isize) -> f64 {
        a as f64 - 0.5 * (self.core - 1) as f64
    }

    /// Weights of the quadratic through three box averages at offsets
    /// `-1, 0, 1` (in macro spacings), evaluated at `s`.
    fn quadratic_weights(&self, s: f64) -> [f64; 3] {
        let h = self.lattice.spacing();
        let d = self.stride() as f64 * h;
        let c = self.core as f64;
        let var = (c * c - 1.0) / 12.0 * h * h / (d * d);
        // M^T w = (1, s, s^2) with rows (1, o, o^2 + var)
        let mt = [1.0, 1.0, 1.0, -1.0, 0.0, 1.0, 1.0 + var, var, 1.0 + var];
        let w = solve_dense(&mt, &[1.0, s, s * s], 3).expect("distinct offsets");
        [w[0], w[1], w[2]]
    }

    /// Interpolant weights over the 3x3 neighbourhood (row `dy`, column `dx`)
    /// at local site `(a, b)`.
    fn stencil_at(&self, a: f64, b: f64) -> [f64; 9] {
        let unit = self.stride() as f64;
        let wx = self.quadratic_weights(a / unit);
        let wy = self.quadratic_weights(b / unit);
        let mut w = [0.0; 9];
        for dy in 0..3 {
            for dx in 0..3 {
                w[dy * 3 + dx] = wy[dy] * wx[dx];
            }
        }
        w
    }

    fn operator(&self) -> PatchOperator {
        let c = self.core;
        let nc = c * c;
        let ghosts = self.ghosts();
        let ng = ghosts.len();
        let h = self.lattice.spacing();
        let inv = 1.0 / (h * h);
        let p = self.lattice.period as isize;
        let lat = &self.lattice;
        let (gi, gj) = (self.site(0, 0), self.site(0, 0));
        let mut m = vec![0.0; nc * nc];
        let mut b = vec![0.0; nc * ng];
        let ghost_index = |a: isize, bb: isize| ghosts.iter().position(|g| g.a == a && g.b == bb).unwrap();
        for bb in 0..c as isize {
            for a in 0..c as isize {
                let r = bb as usize * c + a as usize;
                let (x, y) = (gi + a, gj + bb);
                let bonds = [
                    (a + 1, bb, lat.kx(x, y)),
                    (a - 1, bb, lat.kx(x - 1, y)),
                    (a, bb + 1, lat.ky(x, y)),
                    (a, bb - 1, lat.ky(x, y - 1)),
                ];
                for (na, nb, k) in bonds {
                    m[r * nc + r] -= k * inv;
                    if (0..c as isize).contains(&na) && (0..c as isize).contains(&nb) {
                        m[r * nc + nb as usize * c + na as usize] += k * inv;
                    } else {
                        b[r * ng + ghost_index(na, nb)] += k * inv;
                    }
                }
            }
        }
        // ghost = W u + S U_nbhd
        let mut w = vec![0.0; ng * nc];
        let mut s = vec![0.0; ng * 9];
        for (q, g) in ghosts.iter().enumerate() {
            let at = self.stencil_at(self.offset(g.a), self.offset(g.b));
            match self.coupling {
                GhostCoupling::Dirichlet => s[q * 9..q * 9 + 9].copy_from_slice(&at),
                GhostCoupling::PeriodJump => {
                    let (sa, sb) = (g.a - p * g.nx, g.b - p * g.ny);
                    w[q * nc + sb as usize * c + sa as usize] = 1.0;
                    let from = self.stencil_at(self.offset(sa), self.offset(sb));
                    for k in 0..9 {
                        s[q * 9 + k] = at[k] - from[k];
                    }
                }
            }
        }
        let bw = matmul(&b, &w, nc, ng, nc);
        m.iter_mut().zip(&bw).for_each(|(x, y)| *x += y);
        PatchOperator { nc, ng, m, b, w, s }
    }
}

/// Linear patch dynamics `u' = M u + B v` with `v = S U_nbhd` and ghosts `W u + v`.
struct PatchOperator {
    nc: usize,
    ng: usize,
    m: Vec<f64>,
    b: Vec<f64>,
    w: Vec<f64>,
    s: Vec<f64>,
}

fn neighbourhood(u: &[f64], n: usize, i: usize, j: usize) -> [f64; 9] {
    let mut out = [0.0; 9];
    for dy in 0..3 {
        let jj = (j + n + dy - 1) % n;
        for dx in 0..3 {
            let ii = (i + n + dx - 1) % n;
            out[dy * 3 + dx] = u[jj * n + ii];
        }
    }
    out
}

/// Ghost-ring values of patch `(i, j)` given the macro field and the patch's
/// current core values (row-major, `core x core`). Order follows
/// [`PatchGrid2D::ghost_sites`].
pub fn patch_edge_values_2d(u: &MacroField, i: usize, j: usize, grid: &PatchGrid2D, core: &[f64]) -> Result<Vec<f64>> {
    let MacroGrid::Torus { n, .. } = u.grid else {
        return input("patch coupling needs a periodic macro grid");
    };
    if n != grid.patches {
        return Err(Error::Geometry(format!("macro grid has {n} points per side, patch grid {}", grid.patches)));
    }
    let op = grid.operator();
    if core.len() != op.nc {
        return input(format!("patch core needs {} values, got {}", op.nc, core.len()));
    }
    let nb = neighbourhood(&u.values, n, i, j);
    Ok((0..op.ng)
        .map(|q| {
            let jump: f64 = (0..9).map(|k| op.s[q * 9 + k] * nb[k]).sum();
            let copy: f64 = (0..op.nc).map(|r| op.w[q * op.nc + r] * core[r]).sum();
            jump + copy
        })
        .collect())
}

/// State of all patches, patch-major: patch `(i, j)` occupies
/// `[(j * patches + i) * core^2, ...)`.
pub struct GapTooth2D<'a> {
    pub grid: &'a PatchGrid2D,
    pub u: Vec<f64>,
    pub time: f64,
    op: PatchOperator,
    mean_m: Vec<f64>,
    mean_bs: [f64; 9],
    bs: Vec<f64>,
}

impl<'a> GapTooth2D<'a> {
    /// Samples `u0` at every core site.
    pub fn new(grid: &'a PatchGrid2D, u0: impl Fn(f64, f64) -> f64) -> Result<Self> {
        grid.validate()?;
        let op = grid.operator();
        let h = grid.lattice.spacing();
        let c = grid.core;
        let np = grid.patches;
        let mut u = vec![0.0; np * np * op.nc];
        for j in 0..np {
            for i in 0..np {
                let base = (j * np + i) * op.nc;
                for b in 0..c {
                    for a in 0..c {
                        let x = grid.site(i, a as isize) as f64 * h;
                        let y = grid.site(j, b as isize) as f64 * h;
                        u[base + b * c + a] = u0(x, y);
                    }
                }
            }
        }
        let inv = 1.0 / op.nc as f64;
        let mean_m: Vec<f64> = (0..op.nc).map(|col| (0..op.nc).map(|r| op.m[r * op.nc + col]).sum::<f64>() * inv).collect();
        let bs = matmul(&op.b, &op.s, op.nc, op.ng, 9);
        let mut mean_bs = [0.0; 9];
        for (k, slot) in mean_bs.iter_mut().enumerate() {
            *slot = (0..op.nc).map(|r| bs[r * 9 + k]).sum::<f64>() * inv;
        }
        Ok(GapTooth2D { grid, u, time: 0.0, op, mean_m, mean_bs, bs })
    }

    pub fn macro_field(&self) -> MacroField {
        let nc = self.op.nc;
        let values = self.u.chunks(nc).map(|p| p.iter().sum::<f64>() / nc as f64).collect();
        MacroField { grid: self.grid.macro_grid(), values, time: self.time }
    }

    /// Core average of the instantaneous lattice right-hand side.
    pub fn macro_rate(&self) -> Vec<f64> {
        let np = self.grid.patches;
        let nc = self.op.nc;
        let big = self.macro_field();
        (0..np * np)
            .map(|q| {
                let nb = neighbourhood(&big.values, np, q % np, q / np);
                let patch = &self.u[q * nc..(q + 1) * nc];
                let a: f64 = self.mean_m.iter().zip(patch).map(|(m, v)| m * v).sum();
                let b: f64 = self.mean_bs.iter().zip(&nb).map(|(m, v)| m * v).sum();
                a + b
            })
            .collect()
    }

    fn drive(&self, big: &[f64], q: usize, out: &mut [f64]) {
        let np = self.grid.patches;
        let nb = neighbourhood(big, np, q % np, q / np);
        for r in 0..self.op.nc {
            out[r] = (0..9).map(|k| self.bs[r * 9 + k] * nb[k]).sum();
        }
    }

    /// Advances to `time + span` with the given stepper.
    pub fn advance(&mut self, span: f64, stepper: &PatchStepper, prop: &Propagator) -> Result<()> {
        match *stepper {
            PatchStepper::Exponential { dt } => {
                let steps = whole_steps(span, dt, "interval")?;
                for _ in 0..steps {
                    self.exp_step(prop);
                }
            }
            PatchStepper::Rk4 { refresh_every } => {
                let dt = prop.dt;
                let steps = whole_steps(span, dt, "interval")?;
                let every = refresh_every.max(1);
                let nc = self.op.nc;
                let np2 = self.grid.patches * self.grid.patches;
                let mut drives = vec![0.0; np2 * nc];
                for k in 0..steps {
                    if k % every == 0 {
                        let big = self.macro_field().values;
                        for q in 0..np2 {
                            self.drive(&big, q, &mut drives[q * nc..(q + 1) * nc]);
                        }
                    }
                    let m = &self.op.m;
                    for q in 0..np2 {
                        let f = &drives[q * nc..(q + 1) * nc];
                        let next = crate::micro::rk4(&self.u[q * nc..(q + 1) * nc], dt, |v, out| {
                            for r in 0..nc {
                                out[r] = f[r] + (0..nc).map(|c| m[r * nc + c] * v[c]).sum::<f64>();
                            }
                        });
                        self.u[q * nc..(q + 1) * nc].copy_from_slice(&next);
                    }
                }
            }
        }
        self.time += span;
        if let Some(q) = self.u.iter().position(|v| !(v.abs() <= BLOW_UP)) {
            return Err(Error::Numerical(format!("patch {} blew up by t = {}", q / self.op.nc, self.time)));
        }
        Ok(())
    }

    fn exp_step(&mut self, prop: &Propagator) {
        let nc = self.op.nc;
        let np = self.grid.patches;
        let big = self.macro_field().values;
        let mut next = vec![0.0; nc];
        for q in 0..np * np {
            let nb = neighbourhood(&big, np, q % np, q / np);
            let patch = &self.u[q * nc..(q + 1) * nc];
            for r in 0..nc {
                let e = &prop.e[r * nc..(r + 1) * nc];
                let k = &prop.k[r * 9..(r + 1) * 9];
                next[r] = e.iter().zip(patch).map(|(a, b)| a * b).sum::<f64>()
                    + k.iter().zip(&nb).map(|(a, b)| a * b).sum::<f64>();
            }
            self.u[q * nc..(q + 1) * nc].copy_from_slice(&next);
        }
    }

    /// Relaxes the fine structure for `span` while holding every patch
    /// average at its current value.
    pub fn heal(&mut self, span: f64, stepper: &PatchStepper, prop: &Propagator) -> Result<()> {
        if span <= 0.0 {
            return Ok(());
        }
        let target = self.macro_field().values;
        let t0 = self.time;
        let nc = self.op.nc;
        let dt = match *stepper {
            PatchStepper::Exponential { dt } => dt,
            PatchStepper::Rk4 { .. } => prop.dt,
        };
        let steps = whole_steps(span, dt, "healing time")?;
        for _ in 0..steps {
            self.advance(dt, stepper, prop)?;
            let now = self.macro_field().values;
            for (q, patch) in self.u.chunks_mut(nc).enumerate() {
                let shift = target[q] - now[q];
                patch.iter_mut().for_each(|v| *v += shift);
            }
        }
        self.time = t0;
        Ok(())
    }

    pub fn propagator(&self, stepper: &PatchStepper) -> Result<Propagator> {
        let nc = self.op.nc;
        match *stepper {
            PatchStepper::Exponential { dt } => {
                if !(dt > 0.0) {
                    return config("exponential step must be positive");
                }
                let md: Vec<f64> = self.op.m.iter().map(|v| v * dt).collect();
                let e = expm(&md, nc);
                let n2 = 2 * nc;
                let mut aug = vec![0.0; n2 * n2];
                for r in 0..nc {
                    for c in 0..nc {
                        aug[r * n2 + c] = md[r * nc + c];
                    }
                    aug[r * n2 + nc + r] = dt;
                }
                let big = expm(&aug, n2);
                let mut phi = vec![0.0; nc * nc];
                for r in 0..nc {
                    for c in 0..nc {
                        phi[r * nc + c] = big[r * n2 + nc + c];
                    }
                }
                let k = matmul(&phi, &self.bs, nc, nc, 9);
                Ok(Propagator { dt, e, k })
            }
            PatchStepper::Rk4 { .. } => Ok(Propagator { dt: self.grid.lattice.stable_dt(), e: Vec::new(), k: Vec::new() }),
        }
    }
}

/// Precomputed one-step propagator shared by every patch.
pub struct Propagator {
    pub dt: f64,
    e: Vec<f64>,
    k: Vec<f64>,
}

/// Gap-tooth run from `u0`, recording `(t, U, dU/dt)` every
/// `sample_interval` up to and including `t_end`.
pub fn simulate_gap_tooth_2d(
    grid: &PatchGrid2D,
    stepper: &PatchStepper,
    u0: impl Fn(f64, f64) -> f64,
    heal_time: f64,
    t_end: f64,
    sample_interval: f64,
) -> Result<SnapshotSeries> {
    let mut sim = GapTooth2D::new(grid, u0)?;
    let mut stepper = *stepper;
    if let PatchStepper::Rk4 { .. } = stepper {
        // shrink the explicit step so samples land exactly
        let stable = grid.lattice.stable_dt();
        let per = (sample_interval / stable).ceil().max(1.0);
        let prop = Propagator { dt: sample_interval / per, e: Vec::new(), k: Vec::new() };
        return run_2d(&mut sim, &stepper, &prop, heal_time, t_end, sample_interval);
    }
    let prop = sim.propagator(&stepper)?;
    if let PatchStepper::Exponential { dt } = &mut stepper {
        *dt = prop.dt;
    }
    run_2d(&mut sim, &stepper, &prop, heal_time, t_end, sample_interval)
}

fn run_2d(
    sim: &mut GapTooth2D,
    stepper: &PatchStepper,
    prop: &Propagator,
    heal_time: f64,
    t_end: f64,
    sample_interval: f64,
) -> Result<SnapshotSeries> {
    sim.heal(heal_time, stepper, prop)?;
    let samples = whole_steps(t_end, sample_interval, "horizon")?;
    let mut series = SnapshotSeries { grid: sim.grid.macro_grid(), ends: None, snapshots: Vec::with_capacity(samples + 1) };
    for k in 0..=samples {
        let t = k as f64 * sample_interval;
        series.snapshots.push(Snapshot { t, u: sim.macro_field().values, dudt: sim.macro_rate() });
        if k < samples {
            sim.advance(sample_interval, stepper, prop)?;
        }
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(lattice: LatticeProblem2D, coupling: GhostCoupling) -> PatchGrid2D {
        PatchGrid2D { lattice, patches: 16, core: 6, coupling }
    }

    fn macro_of(g: &PatchGrid2D, f: impl Fn(f64, f64) -> f64) -> MacroField {
        let mg = g.macro_grid();
        let c = mg.coords();
        let n = g.patches;
        MacroField::new(mg, (0..n * n).map(|k| f(c[k % n], c[k / n])).collect(), 0.0).unwrap()
    }

    #[test]
    fn geometry() {
        let g = grid(LatticeProblem2D::benchmark(480).unwrap(), GhostCoupling::PeriodJump);
        g.validate().unwrap();
        assert_eq!(g.stride(), 30);
        assert_eq!(g.core_start(), 12);
        assert!((g.footprint() - 0.0711).abs() < 1e-3);
        let MacroGrid::Torus { origin, .. } = g.macro_grid() else { panic!() };
        assert!((origin - 14.5 * 2.0 * PI / 480.0).abs() < 1e-15);
        let small = PatchGrid2D { core: 3, ..g.clone() };
        assert!(small.validate().is_err());
    }

    #[test]
    fn constant_macro_field_gives_constant_ghosts() {
        for coupling in [GhostCoupling::Dirichlet, GhostCoupling::PeriodJump] {
            let g = grid(LatticeProblem2D::benchmark(480).unwrap(), coupling);
            let u = macro_of(&g, |_, _| 2.0);
            let ghosts = patch_edge_values_2d(&u, 3, 5, &g, &[2.0; 36]).unwrap();
            assert!(ghosts.iter().all(|v| (v - 2.0).abs() < 1e-13));
        }
    }

    #[test]
    fn planar_macro_field_gives_planar_ghosts() {
        let g = grid(LatticeProblem2D::benchmark(480).unwrap(), GhostCoupling::Dirichlet);
        // plane in x, away from the wrap
        let u = macro_of(&g, |x, _| 0.5 * x);
        let h = g.lattice.spacing();
        for (v, (i, _)) in patch_edge_values_2d(&u, 6, 4, &g, &[0.0; 36]).unwrap().iter().zip(g.ghost_sites(6, 4)) {
            assert!((v - 0.5 * i as f64 * h).abs() < 1e-12);
        }
        let gj = grid(LatticeProblem2D::benchmark(480).unwrap(), GhostCoupling::PeriodJump);
        let core: Vec<f64> = (0..36).map(|k| 0.5 * gj.site(6, (k % 6) as isize) as f64 * h).collect();
        for (v, (i, _)) in patch_edge_values_2d(&u, 6, 4, &gj, &core).unwrap().iter().zip(gj.ghost_sites(6, 4)) {
            assert!((v - 0.5 * i as f64 * h).abs() < 1e-12);
        }
    }

    #[test]
    fn ghost_interpolation_error_is_second_order() {
        let err = |patches: usize| {
            let lat = LatticeProblem2D::uniform(patches * 30, 1.0).unwrap();
            let g = PatchGrid2D { lattice: lat, patches, core: 6, coupling: GhostCoupling::Dirichlet };
            let h = g.lattice.spacing();
            // exact box averages of sin(x) over the core
            let u = macro_of(&g, |x, _| {
                (0..6).map(|a| (x + (a as f64 - 2.5) * h).sin()).sum::<f64>() / 6.0
            });
            let mut worst = 0.0f64;
            for i in 0..patches {
                let vals = patch_edge_values_2d(&u, i, 1, &g, &[0.0; 36]).unwrap();
                for (v, (gi, _)) in vals.iter().zip(g.ghost_sites(i, 1)) {
                    worst = worst.max((v - (gi as f64 * h).sin()).abs());
                }
            }
            worst
        };
        let (e1, e2) = (err(8), err(16));
        assert!(e1 < 0.05 && e2 < e1 / 4.0, "{e1} {e2}");
    }

    #[test]
    fn constant_initial_field_is_steady() {
        let g = PatchGrid2D { lattice: LatticeProblem2D::benchmark(240).unwrap(), patches: 8, core: 6, coupling: GhostCoupling::PeriodJump };
        let s = simulate_gap_tooth_2d(&g, &PatchStepper::Exponential { dt: 1e-3 }, |_, _| 0.7, 0.0, 0.05, 0.01).unwrap();
        for snap in &s.snapshots {
            assert!(snap.u.iter().all(|v| (v - 0.7).abs() < 1e-12));
            assert!(snap.dudt.iter().all(|v| v.abs() < 1e-9));
        }
    }

    fn decay_rate(g: &PatchGrid2D, stepper: PatchStepper, along_x: bool) -> f64 {
        let f = move |x: f64, y: f64| if along_x { x.sin() } else { y.sin() };
        let s = simulate_gap_tooth_2d(g, &stepper, f, 0.0, 0.2, 0.1).unwrap();
        let c = g.macro_grid().coords();
        let n = g.patches;
        let amp = |u: &[f64]| {
            let basis: Vec<f64> = (0..n * n).map(|k| if along_x { c[k % n].sin() } else { c[k / n].sin() }).collect();
            u.iter().zip(&basis).map(|(a, b)| a * b).sum::<f64>() / basis.iter().map(|b| b * b).sum::<f64>()
        };
        let a1 = amp(&s.snapshots[1].u);
        let a2 = amp(&s.snapshots[2].u);
        (a1 / a2).ln() / 0.1
    }

    #[test]
    fn uniform_medium_decays_at_its_diffusivity() {
        let g = grid(LatticeProblem2D::uniform(480, 1.0).unwrap(), GhostCoupling::PeriodJump);
        let r = decay_rate(&g, PatchStepper::Exponential { dt: 1e-3 }, true);
        assert!((r - 1.0).abs() < 0.05, "{r}");
    }

    #[test]
    fn rk4_and_exponential_steppers_agree() {
        let g = PatchGrid2D { lattice: LatticeProblem2D::benchmark(240).unwrap(), patches: 8, core: 6, coupling: GhostCoupling::PeriodJump };
        let f = |x: f64, y: f64| (x + 0.3).sin() * (2.0 * y).cos();
        let a = simulate_gap_tooth_2d(&g, &PatchStepper::Exponential { dt: 2e-4 }, f, 0.0, 0.02, 0.01).unwrap();
        let b = simulate_gap_tooth_2d(&g, &PatchStepper::Rk4 { refresh_every: 1 }, f, 0.0, 0.02, 0.01).unwrap();
        let last = |s: &SnapshotSeries| s.snapshots.last().unwrap().u.clone();
        let (ua, ub) = (last(&a), last(&b));
        let scale = ua.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let diff = ua.iter().zip(&ub).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(diff < 2e-3 * scale, "{diff}");
    }
}
