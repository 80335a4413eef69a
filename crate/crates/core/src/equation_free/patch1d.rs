//! Patch dynamics (bursts plus projective steps) and the continuous-time
//! gap-tooth scheme in 1D.

use serde::{Deserialize, Serialize};

use super::tooth::{coupling_polynomial, lift, restrict_tooth, tooth_edge_slopes, LiftAnchor, ToothGrid1D};
use super::{Snapshot, SnapshotSeries, BLOW_UP};
use crate::error::{config, Error, Result};
use crate::field::{EndValues, MacroField};
use crate::micro::{half_node_diffusivity, step_micro_1d, Boundary, DetailedProblem1D, MicroState1D};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectiveMethod {
    Euler,
    /// Two-stage Runge-Kutta (Heun); estimates twice per macro step.
    Heun,
}

/// Full description of a 1D equation-free run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchConfig {
    pub teeth: ToothGrid1D,
    pub micro_dx: f64,
    pub micro_dt: f64,
    pub macro_dt: f64,
    /// Micro steps per derivative estimate.
    pub burst_steps: usize,
    /// Backward-Euler steps between lifting and the first recorded average.
    pub heal_steps: usize,
    /// Theta of the burst steps; 0.5 is Crank-Nicolson.
    pub theta: f64,
    pub projective: ProjectiveMethod,
    pub lift_anchor: LiftAnchor,
}

impl PatchConfig {
    pub fn validate(&self, epsilon: f64) -> Result<()> {
        self.teeth.validate()?;
        if !(self.micro_dx > 0.0) || self.micro_dx > epsilon / 20.0 * (1.0 + 1e-9) {
            return config(format!("micro spacing {} must resolve epsilon {epsilon} (dx <= eps/20)", self.micro_dx));
        }
        if self.burst_steps == 0 {
            return config("burst needs at least one micro step");
        }
        if !(self.micro_dt > 0.0 && self.macro_dt > 0.0) {
            return config("time steps must be positive");
        }
        if self.burst_steps as f64 * self.micro_dt > self.macro_dt * (1.0 + 1e-12) {
            return config("a burst must not outlast the macro step");
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return config(format!("burst theta must lie in [0.5, 1], got {}", self.theta));
        }
        Ok(())
    }

    pub fn burst_time(&self) -> f64 {
        self.burst_steps as f64 * self.micro_dt
    }
}

/// Lift-heal-burst-restrict estimator for `dU/dt`.
pub struct PatchDynamics1D<'a> {
    pub config: &'a PatchConfig,
    pub ends: Option<EndValues>,
    a_half: Vec<Vec<f64>>,
}

impl<'a> PatchDynamics1D<'a> {
    pub fn new(config: &'a PatchConfig, problem: &DetailedProblem1D, ends: Option<EndValues>) -> Result<Self> {
        problem.validate()?;
        config.validate(problem.epsilon)?;
        let g = &config.teeth;
        if g.x_lo < problem.x_lo - 1e-12 || g.x_hi > problem.x_hi + 1e-12 {
            return Err(Error::Geometry("tooth grid extends past the problem domain".into()));
        }
        let a_half = (0..g.teeth)
            .map(|i| {
                let (x0, n) = g.patch_grid(i, config.micro_dx)?;
                Ok(half_node_diffusivity(&problem.diffusivity, problem.epsilon, x0, config.micro_dx, n))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PatchDynamics1D { config, ends, a_half })
    }

    /// Burst for one tooth; returns `(U^t, U^{t + burst})`.
    pub fn burst(&self, u: &MacroField, i: usize) -> Result<(f64, f64)> {
        let c = self.config;
        let g = &c.teeth;
        let mut s = lift(u, self.ends, g, i, c.micro_dx, c.lift_anchor)?;
        let left = Boundary::Dirichlet { value: s.values[0] };
        let right = Boundary::Dirichlet { value: *s.values.last().unwrap() };
        let run = |s: &mut MicroState1D, steps: usize, theta: f64| -> Result<()> {
            for _ in 0..steps {
                *s = step_micro_1d(s, &self.a_half[i], left, right, c.micro_dt, theta)
                    .map_err(|e| tooth_error(e, i))?;
            }
            Ok(())
        };
        run(&mut s, c.heal_steps, 1.0)?;
        let before = restrict_tooth(&s, g.center(i), g.tooth_width)?;
        run(&mut s, c.burst_steps, c.theta)?;
        let after = restrict_tooth(&s, g.center(i), g.tooth_width)?;
        if !after.is_finite() {
            return Err(Error::Numerical(format!("tooth {i}: burst produced a non-finite average")));
        }
        Ok((before, after))
    }

    /// `(U^{t+burst} - U^t) / burst` per tooth.
    pub fn estimate_dudt(&self, u: &MacroField) -> Result<Vec<f64>> {
        let tau = self.config.burst_time();
        (0..self.config.teeth.teeth)
            .map(|i| self.burst(u, i).map(|(b, a)| (a - b) / tau))
            .collect()
    }

    /// One projective step; returns the new field and the first-stage estimate.
    pub fn projective_step(&self, u: &MacroField) -> Result<(MacroField, Vec<f64>)> {
        let dt = self.config.macro_dt;
        let k1 = self.estimate_dudt(u)?;
        let next = match self.config.projective {
            ProjectiveMethod::Euler => projective_step(u, &k1, dt)?,
            ProjectiveMethod::Heun => {
                let mid = projective_step(u, &k1, dt)?;
                let k2 = self.estimate_dudt(&mid)?;
                let avg: Vec<f64> = k1.iter().zip(&k2).map(|(a, b)| 0.5 * (a + b)).collect();
                projective_step(u, &avg, dt)?
            }
        };
        Ok((next, k1))
    }
}

fn tooth_error(e: Error, i: usize) -> Error {
    match e {
        Error::Numerical(m) => Error::Numerical(format!("tooth {i}: {m}")),
        other => other,
    }
}

/// Forward-Euler extrapolation `U + dt dU/dt`.
pub fn projective_step(u: &MacroField, dudt: &[f64], dt: f64) -> Result<MacroField> {
    if dudt.len() != u.values.len() {
        return Err(Error::Input(format!("{} rates for {} values", dudt.len(), u.values.len())));
    }
    if !(dt > 0.0) {
        return Err(Error::Input(format!("macro step must be positive, got {dt}")));
    }
    let values = u.values.iter().zip(dudt).map(|(v, r)| v + dt * r).collect();
    Ok(MacroField { grid: u.grid, values, time: u.time + dt })
}

/// Number of whole `step`s in `span`, or a configuration error.
pub(crate) fn whole_steps(span: f64, step: f64, what: &str) -> Result<usize> {
    let k = span / step;
    let r = k.round();
    if (k - r).abs() > 1e-6 * r.max(1.0) {
        return config(format!("{what} {span} is not a multiple of the step {step}"));
    }
    Ok(r as usize)
}

/// Patch dynamics from `u0` to `t_end`, recording `(t, U, dU/dt)` every
/// `sample_interval`.
pub fn simulate_patch_dynamics_1d(
    config: &PatchConfig,
    problem: &DetailedProblem1D,
    u0: &MacroField,
    ends: Option<EndValues>,
    t_end: f64,
    sample_interval: f64,
) -> Result<SnapshotSeries> {
    let pd = PatchDynamics1D::new(config, problem, ends)?;
    let steps = whole_steps(t_end, config.macro_dt, "horizon")?;
    let every = whole_steps(sample_interval, config.macro_dt, "sampling interval")?.max(1);
    let mut u = u0.clone();
    let mut series = SnapshotSeries { grid: u0.grid, ends, snapshots: Vec::new() };
    for k in 0..=steps {
        let t = k as f64 * config.macro_dt;
        u.time = t;
        if k == steps {
            if k % every == 0 {
                let dudt = pd.estimate_dudt(&u)?;
                series.snapshots.push(Snapshot { t, u: u.values.clone(), dudt });
            }
            break;
        }
        let (next, dudt) = pd.projective_step(&u)?;
        if k % every == 0 {
            series.snapshots.push(Snapshot { t, u: u.values.clone(), dudt });
        }
        if next.values.iter().any(|v| !(v.abs() <= BLOW_UP)) {
            return Err(Error::Numerical(format!("macro field blew up at step {} (t = {t})", k + 1)));
        }
        u = next;
    }
    Ok(series)
}

/// How a gap-tooth tooth sees the slope of its coupling polynomial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToothEdge {
    /// Mean slope over the outermost medium period.
    PeriodSlope,
    /// Pointwise flux `a(edge) * slope`.
    PointFlux,
}

/// Continuous-time gap-tooth scheme on the tooth cores only.
pub struct GapTooth1D<'a> {
    pub grid: &'a ToothGrid1D,
    pub problem: &'a DetailedProblem1D,
    pub ends: Option<EndValues>,
    pub edge: ToothEdge,
    pub states: Vec<MicroState1D>,
    a_half: Vec<Vec<f64>>,
    period_nodes: usize,
}

impl<'a> GapTooth1D<'a> {
    /// Teeth start from the lifted macro field, restricted to their cores.
    pub fn new(
        grid: &'a ToothGrid1D,
        problem: &'a DetailedProblem1D,
        u0: &MacroField,
        ends: Option<EndValues>,
        micro_dx: f64,
        edge: ToothEdge,
    ) -> Result<Self> {
        problem.validate()?;
        let core = ToothGrid1D { buffer_width: grid.tooth_width, ..grid.clone() };
        core.validate()?;
        if micro_dx > problem.epsilon / 20.0 * (1.0 + 1e-9) {
            return config("micro spacing must resolve epsilon (dx <= eps/20)");
        }
        let period_nodes = (problem.epsilon / micro_dx).round() as usize;
        let mut states = Vec::with_capacity(grid.teeth);
        let mut a_half = Vec::with_capacity(grid.teeth);
        for i in 0..grid.teeth {
            let s = lift(u0, ends, &core, i, micro_dx, LiftAnchor::Point)?;
            if edge == ToothEdge::PeriodSlope && period_nodes + 1 >= s.len() {
                return config("tooth must span more than one medium period");
            }
            a_half.push(half_node_diffusivity(&problem.diffusivity, problem.epsilon, s.x0, micro_dx, s.len()));
            states.push(s);
        }
        Ok(GapTooth1D { grid, problem, ends, edge, states, a_half, period_nodes })
    }

    pub fn macro_field(&self) -> Result<MacroField> {
        let values = self
            .states
            .iter()
            .enumerate()
            .map(|(i, s)| restrict_tooth(s, self.grid.center(i), self.grid.tooth_width))
            .collect::<Result<Vec<_>>>()?;
        MacroField::new(self.grid.macro_grid(), values, self.states[0].time)
    }

    /// Advances every tooth by `dt` with edge slopes frozen at the current
    /// coupling polynomials.
    pub fn step(&mut self, dt: f64, theta: f64) -> Result<()> {
        let u = self.macro_field()?;
        let h = self.grid.tooth_width;
        for i in 0..self.grid.teeth {
            let p = coupling_polynomial(&u, self.ends, self.grid, i, self.grid.coupling_degree)?;
            let (gl, gr) = tooth_edge_slopes(&p, h);
            let s = &self.states[i];
            let (left, right) = match self.edge {
                ToothEdge::PeriodSlope => (
                    Boundary::PeriodSlope { slope: gl, nodes: self.period_nodes },
                    Boundary::PeriodSlope { slope: gr, nodes: self.period_nodes },
                ),
                ToothEdge::PointFlux => {
                    let eps = self.problem.epsilon;
                    let a = &self.problem.diffusivity;
                    (
                        Boundary::Neumann { flux: a.eval(s.x0 / eps) * gl },
                        Boundary::Neumann { flux: a.eval(s.x_end() / eps) * gr },
                    )
                }
            };
            self.states[i] = step_micro_1d(s, &self.a_half[i], left, right, dt, theta).map_err(|e| tooth_error(e, i))?;
        }
        Ok(())
    }
}

/// Gap-tooth run recording `(t, U, dU/dt)` every `sample_interval`; the
/// recorded rate is the difference quotient over the following micro step.
#[allow(clippy::too_many_arguments)]
pub fn simulate_gap_tooth_1d(
    grid: &ToothGrid1D,
    problem: &DetailedProblem1D,
    u0: &MacroField,
    ends: Option<EndValues>,
    micro_dx: f64,
    micro_dt: f64,
    t_end: f64,
    sample_interval: f64,
) -> Result<SnapshotSeries> {
    let mut gt = GapTooth1D::new(grid, problem, u0, ends, micro_dx, ToothEdge::PeriodSlope)?;
    let steps = whole_steps(t_end, micro_dt, "horizon")?;
    let every = whole_steps(sample_interval, micro_dt, "sampling interval")?.max(1);
    let mut series = SnapshotSeries { grid: u0.grid, ends, snapshots: Vec::new() };
    let mut u = gt.macro_field()?;
    for k in 0..=steps {
        let t = k as f64 * micro_dt;
        gt.step(micro_dt, 0.5)?;
        let next = gt.macro_field()?;
        if k % every == 0 {
            let dudt = next.values.iter().zip(&u.values).map(|(a, b)| (a - b) / micro_dt).collect();
            series.snapshots.push(Snapshot { t, u: u.values.clone(), dudt });
        }
        if next.max_abs() > BLOW_UP || next.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("gap-tooth field blew up at step {}", k + 1)));
        }
        u = next;
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homogenization::BENCH_A_STAR;
    use crate::micro::Diffusivity;
    use std::f64::consts::PI;

    fn problem(a: Diffusivity, eps: f64) -> DetailedProblem1D {
        DetailedProblem1D {
            diffusivity: a,
            epsilon: eps,
            x_lo: 0.0,
            x_hi: 1.0,
            left: Boundary::Dirichlet { value: 0.0 },
            right: Boundary::Dirichlet { value: 0.0 },
        }
    }

    fn config() -> PatchConfig {
        PatchConfig {
            teeth: ToothGrid1D {
                x_lo: 0.0,
                x_hi: 1.0,
                teeth: 10,
                tooth_width: 0.01,
                buffer_width: 0.04,
                coupling_degree: 2,
                lift_degree: 2,
            },
            micro_dx: 5e-5,
            micro_dt: 1e-6,
            macro_dt: 1e-3,
            burst_steps: 10,
            heal_steps: 10,
            theta: 0.5,
            projective: ProjectiveMethod::Euler,
            lift_anchor: LiftAnchor::Point,
        }
    }

    fn field(c: &PatchConfig, f: impl Fn(f64) -> f64) -> MacroField {
        let v = (0..c.teeth.teeth).map(|i| f(c.teeth.center(i))).collect();
        MacroField::new(c.teeth.macro_grid(), v, 0.0).unwrap()
    }

    #[test]
    fn constant_field_has_no_rate() {
        let c = config();
        let p = problem(Diffusivity::benchmark(), 1e-3);
        let ends = Some(EndValues { left: 1.5, right: 1.5 });
        let pd = PatchDynamics1D::new(&c, &p, ends).unwrap();
        let r = pd.estimate_dudt(&field(&c, |_| 1.5)).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-6), "{r:?}");
    }

    #[test]
    fn single_mode_in_uniform_medium() {
        let c = config();
        let p = problem(Diffusivity::Constant { value: 0.8 }, 1e-3);
        let pd = PatchDynamics1D::new(&c, &p, None).unwrap();
        let u = field(&c, |x| (2.0 * PI * x).sin());
        let r = pd.estimate_dudt(&u).unwrap();
        let dx = c.teeth.spacing();
        // quadratic lift reproduces the centred second difference
        let fd = -(2.0 / (dx * dx)) * (1.0 - (2.0 * PI * dx).cos());
        for i in 1..9 {
            let exact = -0.8 * (2.0 * PI).powi(2) * u.values[i];
            assert!((r[i] - exact).abs() <= 0.05 * exact.abs(), "{i}: {} vs {exact}", r[i]);
            assert!((r[i] - 0.8 * fd * u.values[i]).abs() <= 1e-3 * (fd * u.values[i]).abs() + 1e-6);
        }
    }

    #[test]
    fn heterogeneous_rate_matches_effective_operator() {
        let c = config();
        let p = problem(Diffusivity::benchmark(), 1e-3);
        let f = |x: f64| (PI * x).sin() + 0.3 * (3.0 * PI * x).cos();
        let ends = EndValues { left: f(0.0), right: f(1.0) };
        let pd = PatchDynamics1D::new(&c, &p, Some(ends)).unwrap();
        let u = field(&c, f);
        let r = pd.estimate_dudt(&u).unwrap();
        let padded = crate::features::pad_line(&u.values, ends, 1).unwrap();
        let dx = c.teeth.spacing();
        let scale = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..10 {
            let target = BENCH_A_STAR * (padded[i] - 2.0 * padded[i + 1] + padded[i + 2]) / (dx * dx);
            assert!((r[i] - target).abs() < 0.05 * scale, "{i}: {} vs {target}", r[i]);
        }
    }

    #[test]
    fn euler_projection_arithmetic() {
        let g = config().teeth.macro_grid();
        let u = MacroField::new(g, vec![0.0; 10], 0.0).unwrap();
        let next = projective_step(&u, &[1.0; 10], 1e-3).unwrap();
        assert!(next.values.iter().all(|v| (*v - 1e-3).abs() < 1e-18));
        let one = MacroField::new(g, vec![1.0; 10], 0.0).unwrap();
        let next = projective_step(&one, &[-1.0; 10], 0.1).unwrap();
        assert!(next.values.iter().all(|v| (*v - 0.9).abs() < 1e-15));
    }

    #[test]
    fn zero_horizon_gives_one_record() {
        let c = config();
        let p = problem(Diffusivity::benchmark(), 1e-3);
        let u = field(&c, |x| x);
        let s = simulate_patch_dynamics_1d(&c, &p, &u, Some(EndValues { left: 0.0, right: 1.0 }), 0.0, 1e-3).unwrap();
        assert_eq!(s.snapshots.len(), 1);
        assert_eq!(s.snapshots[0].t, 0.0);
    }

    #[test]
    fn steady_linear_profile_stays_put() {
        let c = config();
        let u = field(&c, |x| 1.0 - 2.0 * x);
        let ends = Some(EndValues { left: 1.0, right: -1.0 });
        // exact in a uniform medium, up to incomplete healing otherwise
        for (a, tol) in [(Diffusivity::Constant { value: 0.6 }, 1e-9), (Diffusivity::benchmark(), 1e-3)] {
            let s = simulate_patch_dynamics_1d(&c, &problem(a, 1e-3), &u, ends, 0.02, 1e-2).unwrap();
            for snap in &s.snapshots {
                for (a, b) in snap.u.iter().zip(&u.values) {
                    assert!((a - b).abs() < tol, "{} {a} {b}", snap.t);
                }
            }
        }
    }

    #[test]
    fn bad_config_is_rejected() {
        let p = problem(Diffusivity::benchmark(), 1e-3);
        let c = PatchConfig { micro_dx: 1e-4, ..config() };
        assert!(matches!(PatchDynamics1D::new(&c, &p, None), Err(Error::Config(_))));
        let c = PatchConfig { burst_steps: 0, ..config() };
        assert!(matches!(PatchDynamics1D::new(&c, &p, None), Err(Error::Config(_))));
    }

    #[test]
    fn gap_tooth_keeps_linear_data_linear() {
        let g = ToothGrid1D { buffer_width: 0.01, ..config().teeth };
        let p = problem(Diffusivity::Constant { value: 1.0 }, 1e-3);
        let c = config();
        let u0 = field(&c, |x| 0.3 + 0.7 * x);
        let ends = Some(EndValues { left: 0.3, right: 1.0 });
        let mut gt = GapTooth1D::new(&g, &p, &u0, ends, 5e-5, ToothEdge::PeriodSlope).unwrap();
        for _ in 0..100 {
            gt.step(1e-5, 0.5).unwrap();
        }
        let u = gt.macro_field().unwrap();
        for (a, b) in u.values.iter().zip(&u0.values) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
