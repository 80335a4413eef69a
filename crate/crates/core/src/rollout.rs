//! Time integration of learned right-hand sides and evaluation metrics.

use serde::{Deserialize, Serialize};

use crate::equation_free::{SnapshotSeries, BLOW_UP};
use crate::error::{config, input, Error, Result};
use crate::field::{EndValues, MacroField, MacroGrid};
use crate::learner::RhsModel;
use crate::spectral::{wavenumber, Spectral2D};

/// Where a trajectory came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Homogenized,
    PatchDynamics,
    GapTooth,
    LearnedMlp,
    LearnedStencil,
}

/// Macro states on one grid at strictly increasing times.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub source: Source,
    pub grid: MacroGrid,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(source: Source, grid: MacroGrid, times: Vec<f64>, states: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != states.len() {
            return input(format!("{} times for {} states", times.len(), states.len()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return input("trajectory times must increase strictly");
        }
        if let Some(k) = states.iter().position(|s| s.len() != grid.len()) {
            return input(format!("state {k} does not fit the grid"));
        }
        Ok(Trajectory { source, grid, times, states })
    }

    pub fn from_series(series: &SnapshotSeries, source: Source) -> Result<Self> {
        let times = series.snapshots.iter().map(|s| s.t).collect();
        let states = series.snapshots.iter().map(|s| s.u.clone()).collect();
        Self::new(source, series.grid, times, states)
    }
}

/// Step size and effective-diffusivity scale for rollouts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutConfig {
    pub dt: f64,
    /// Estimate of the effective diffusivity used for the stability bound.
    pub diffusivity_scale: f64,
}

impl RolloutConfig {
    /// Largest admissible step `0.4 dx^2 / (2 d a)` in `d` dimensions.
    pub fn max_dt(&self, grid: &MacroGrid) -> f64 {
        let dims = if grid.is_periodic() { 2.0 } else { 1.0 };
        0.4 * grid.spacing().powi(2) / (2.0 * dims * self.diffusivity_scale)
    }

    pub fn validate(&self, grid: &MacroGrid) -> Result<()> {
        if !(self.dt > 0.0) || !(self.diffusivity_scale > 0.0) {
            return config("rollout step and diffusivity scale must be positive");
        }
        let bound = self.max_dt(grid);
        if self.dt > bound * (1.0 + 1e-12) {
            return config(format!("rollout step {} exceeds the stability bound {bound}", self.dt));
        }
        Ok(())
    }
}

/// Fixed-step RK4 on `dU/dt = rhs(U)` landing exactly on every time in
/// `t_grid`, which must start at `u0.time`.
pub fn integrate_rhs(
    mut rhs: impl FnMut(&MacroField) -> Result<Vec<f64>>,
    u0: &MacroField,
    t_grid: &[f64],
    dt: f64,
    source: Source,
) -> Result<Trajectory> {
    if t_grid.is_empty() || (t_grid[0] - u0.time).abs() > 1e-12 {
        return input("output times must start at the initial time");
    }
    if !(dt > 0.0) {
        return config("step must be positive");
    }
    let n = u0.values.len();
    let mut u = u0.clone();
    let mut states = vec![u.values.clone()];
    let mut stage = u.clone();
    let mut eval = |stage: &mut MacroField, base: &[f64], k: Option<(&[f64], f64)>, t: f64| -> Result<Vec<f64>> {
        stage.time = t;
        match k {
            Some((k, c)) => stage.values.iter_mut().zip(base.iter().zip(k)).for_each(|(s, (b, k))| *s = b + c * k),
            None => stage.values.copy_from_slice(base),
        }
        let r = rhs(stage)?;
        if r.len() != n {
            return input(format!("right-hand side returned {} values for {n} points", r.len()));
        }
        Ok(r)
    };
    for w in t_grid.windows(2) {
        let span = w[1] - w[0];
        let steps = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for s in 0..steps {
            let t = w[0] + s as f64 * h;
            let base = u.values.clone();
            let k1 = eval(&mut stage, &base, None, t)?;
            let k2 = eval(&mut stage, &base, Some((&k1, 0.5 * h)), t + 0.5 * h)?;
            let k3 = eval(&mut stage, &base, Some((&k2, 0.5 * h)), t + 0.5 * h)?;
            let k4 = eval(&mut stage, &base, Some((&k3, h)), t + h)?;
            for i in 0..n {
                u.values[i] = base[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if u.values.iter().any(|v| !(v.abs() <= BLOW_UP)) {
                return Err(Error::Numerical(format!("rollout blew up near t = {}", t + h)));
            }
        }
        u.time = w[1];
        states.push(u.values.clone());
    }
    Trajectory::new(source, u0.grid, t_grid.to_vec(), states)
}

/// Rolls a learned model forward from `u0` with fixed end values on lines.
pub fn integrate_learned(
    model: &RhsModel,
    u0: &MacroField,
    ends: Option<EndValues>,
    t_grid: &[f64],
    cfg: &RolloutConfig,
) -> Result<Trajectory> {
    cfg.validate(&u0.grid)?;
    let source = match model.architecture {
        crate::learner::Architecture::Mlp => Source::LearnedMlp,
        crate::learner::Architecture::Stencil => Source::LearnedStencil,
    };
    integrate_rhs(|u| model.predict(u, ends), u0, t_grid, cfg.dt, source)
}

/// Which mean the rMSE denominator subtracts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanKind {
    /// One scalar over all snapshots and points.
    #[default]
    Grand,
    /// Each snapshot's own mean.
    PerSnapshot,
}

/// Relative mean squared error of a sequence of snapshots:
/// `sum |v - v_ref|^2 / sum |v_ref - mean|^2`.
pub fn rmse_states(pred: &[Vec<f64>], reference: &[Vec<f64>], mean: MeanKind) -> Result<f64> {
    if pred.len() != reference.len() || pred.iter().zip(reference).any(|(a, b)| a.len() != b.len()) {
        return input("prediction and reference shapes differ");
    }
    let count: usize = reference.iter().map(Vec::len).sum();
    if count == 0 {
        return input("empty reference");
    }
    let grand = reference.iter().flatten().sum::<f64>() / count as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, r) in pred.iter().zip(reference) {
        let m = match mean {
            MeanKind::Grand => grand,
            MeanKind::PerSnapshot => r.iter().sum::<f64>() / r.len() as f64,
        };
        for (a, b) in p.iter().zip(r) {
            num += (a - b) * (a - b);
            den += (b - m) * (b - m);
        }
    }
    if den == 0.0 {
        return Err(Error::UndefinedMetric("reference has no variation about its mean".into()));
    }
    Ok(num / den)
}

/// Trajectory rMSE with the grand-mean denominator.
pub fn rmse(pred: &Trajectory, reference: &Trajectory) -> Result<f64> {
    check_aligned(pred, reference)?;
    rmse_states(&pred.states, &reference.states, MeanKind::Grand)
}

fn check_aligned(a: &Trajectory, b: &Trajectory) -> Result<()> {
    if a.times.len() != b.times.len() || a.times.iter().zip(&b.times).any(|(x, y)| (x - y).abs() > 1e-9) {
        return input("trajectory time stamps differ");
    }
    if !a.grid.matches(&b.grid) {
        return input("trajectory grids differ");
    }
    Ok(())
}

/// `sum (p - t)^2 / sum t^2`.
pub fn relative_mse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return input("relative error needs equal, non-empty inputs");
    }
    let den: f64 = truth.iter().map(|t| t * t).sum();
    if den == 0.0 {
        return Err(Error::UndefinedMetric("truth is identically zero".into()));
    }
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / den)
}

/// Fourier amplitudes of a fixed set of modes along a 2D trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeProjection {
    /// `(k_x, k_y)` of each tracked mode, one per conjugate pair.
    pub modes: Vec<[i64; 2]>,
    /// `amplitudes[t][m]`: real amplitude of mode `m` at time index `t`.
    pub amplitudes: Vec<Vec<f64>>,
}

/// Tracks the `m` modes largest at the first time. Amplitudes use the real
/// convention: `2 sin(3x)` has amplitude 2 and a constant `c` has amplitude
/// `|c|`.
pub fn fourier_projection(traj: &Trajectory, m: usize) -> Result<ModeProjection> {
    let MacroGrid::Torus { n, .. } = traj.grid else {
        return input("Fourier projection needs a periodic 2D trajectory");
    };
    // one representative per conjugate pair
    let mut reps = Vec::new();
    for ky in 0..n {
        for kx in 0..n {
            let (cx, cy) = ((n - kx) % n, (n - ky) % n);
            if (cy, cx) >= (ky, kx) {
                reps.push((kx, ky, (cx, cy) == (kx, ky)));
            }
        }
    }
    if m > reps.len() {
        return input(format!("{m} modes requested but only {} exist", reps.len()));
    }
    let fft = Spectral2D::new(n, n);
    let norm = (n * n) as f64;
    let amps = |u: &[f64]| -> Result<Vec<f64>> {
        let c = fft.forward(u)?;
        Ok(reps.iter().map(|&(kx, ky, own)| c[ky * n + kx].norm() / norm * if own { 1.0 } else { 2.0 }).collect())
    };
    let first = amps(&traj.states[0])?;
    let mut order: Vec<usize> = (0..reps.len()).collect();
    order.sort_by(|&a, &b| first[b].total_cmp(&first[a]).then(a.cmp(&b)));
    order.truncate(m);
    let modes = order.iter().map(|&k| [wavenumber(reps[k].0, n), wavenumber(reps[k].1, n)]).collect();
    let amplitudes = traj
        .states
        .iter()
        .map(|s| amps(s).map(|a| order.iter().map(|&k| a[k]).collect()))
        .collect::<Result<_>>()?;
    Ok(ModeProjection { modes, amplitudes })
}

/// Error summary of predicted trajectories against references.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub times: Vec<f64>,
    /// Mean over trajectories of each snapshot's mean squared error.
    pub mse: Vec<f64>,
    /// Grand-mean rMSE of each trajectory.
    pub rmse: Vec<f64>,
    /// `(|reference snapshot|, |error| / |reference snapshot|)` per snapshot.
    pub amplitude_error: Vec<(f64, f64)>,
}

pub fn error_report(preds: &[Trajectory], refs: &[Trajectory]) -> Result<ErrorReport> {
    if preds.is_empty() || preds.len() != refs.len() {
        return input("need one reference per prediction");
    }
    let times = refs[0].times.clone();
    let mut mse = vec![0.0; times.len()];
    let mut rm = Vec::with_capacity(preds.len());
    let mut pairs = Vec::new();
    for (p, r) in preds.iter().zip(refs) {
        check_aligned(p, r)?;
        if r.times.len() != times.len() {
            return input("references have different lengths");
        }
        for (k, (a, b)) in p.states.iter().zip(&r.states).enumerate() {
            let e: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            mse[k] += e / b.len() as f64 / preds.len() as f64;
            let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                pairs.push((norm, e.sqrt() / norm));
            }
        }
        rm.push(rmse(p, r).unwrap_or(f64::NAN));
    }
    Ok(ErrorReport { times, mse, rmse: rm, amplitude_error: pairs })
}

/// `(|truth|, |pred - truth| / |truth|)` for each snapshot of rates.
pub fn amplitude_errors(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<Vec<(f64, f64)>> {
    if pred.len() != truth.len() {
        return input("prediction and truth counts differ");
    }
    let mut out = Vec::with_capacity(pred.len());
    for (p, t) in pred.iter().zip(truth) {
        if p.len() != t.len() {
            return input("snapshot sizes differ");
        }
        let norm = t.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            let e = p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            out.push((norm, e / norm));
        }
    }
    Ok(out)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = 0.5 * (i + j) as f64 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return input("rank correlation needs two equal series of length at least 2");
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedMetric("a series is constant".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homogenization::{solve_homogenized_2d, HomogenizedModel2D};
    use std::f64::consts::PI;

    fn line_traj(states: Vec<Vec<f64>>) -> Trajectory {
        let n = states[0].len();
        let times = (0..states.len()).map(|k| k as f64).collect();
        Trajectory::new(Source::Homogenized, MacroGrid::Line { x_lo: 0.0, x_hi: 1.0, n }, times, states).unwrap()
    }

    #[test]
    fn rmse_axioms() {
        let r = line_traj(vec![vec![0.0, 2.0]]);
        assert_eq!(rmse(&r, &r).unwrap(), 0.0);
        let p = line_traj(vec![vec![1.0, 1.0]]);
        assert_eq!(rmse(&p, &r).unwrap(), 1.0);
        let c = line_traj(vec![vec![3.0, 3.0]]);
        assert!(matches!(rmse(&r, &c), Err(Error::UndefinedMetric(_))));
        let a = rmse_states(&[vec![0.3, 1.1]], &[vec![0.0, 2.0]], MeanKind::Grand).unwrap();
        let b = rmse_states(&[vec![0.9, 3.3]], &[vec![0.0, 6.0]], MeanKind::Grand).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn rk4_single_step_by_hand() {
        let g = MacroGrid::Line { x_lo: 0.0, x_hi: 1.0, n: 1 };
        let u0 = MacroField::new(g, vec![1.0], 0.0).unwrap();
        let t = integrate_rhs(|u| Ok(vec![-u.values[0]]), &u0, &[0.0, 0.1], 0.1, Source::Homogenized).unwrap();
        let expect = 1.0 - 0.1 + 0.005 - 0.1f64.powi(3) / 6.0 + 0.1f64.powi(4) / 24.0;
        assert!((t.states[1][0] - expect).abs() < 1e-15);
        assert!((t.states[1][0] - 0.90483750).abs() < 1e-8);
    }

    #[test]
    fn zero_rhs_keeps_state() {
        let g = MacroGrid::Line { x_lo: 0.0, x_hi: 1.0, n: 3 };
        let u0 = MacroField::new(g, vec![1.0, -2.0, 0.5], 0.0).unwrap();
        let t = integrate_rhs(|_| Ok(vec![0.0; 3]), &u0, &[0.0, 0.3, 1.0], 0.07, Source::LearnedMlp).unwrap();
        assert!(t.states.iter().all(|s| s == &u0.values));
    }

    #[test]
    fn rollout_step_is_bounded() {
        let g = MacroGrid::Line { x_lo: 0.0, x_hi: 1.0, n: 10 };
        let c = RolloutConfig { dt: 1e-3, diffusivity_scale: 0.5 };
        assert!(c.validate(&g).is_ok());
        assert!(RolloutConfig { dt: 1e-2, ..c }.validate(&g).is_err());
    }

    fn torus(n: usize, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let h = 2.0 * PI / n as f64;
        (0..n * n).map(|k| f((k % n) as f64 * h, (k / n) as f64 * h)).collect()
    }

    #[test]
    fn fourier_amplitude_conventions() {
        let g = MacroGrid::Torus { n: 16, origin: 0.0 };
        let one = |v| Trajectory::new(Source::Homogenized, g, vec![0.0], vec![v]).unwrap();
        let p = fourier_projection(&one(torus(16, |x, _| 2.0 * (3.0 * x).sin())), 1).unwrap();
        assert_eq!(p.modes[0], [3, 0]);
        assert!((p.amplitudes[0][0] - 2.0).abs() < 1e-12);
        let p = fourier_projection(&one(vec![-1.5; 256]), 2).unwrap();
        assert_eq!(p.modes[0], [0, 0]);
        assert!((p.amplitudes[0][0] - 1.5).abs() < 1e-12 && p.amplitudes[0][1] < 1e-12);
        assert!(fourier_projection(&one(vec![0.0; 256]), 200).is_err());
        // adding a constant only moves the zero mode
        let base = torus(16, |x, y| x.sin() + 0.5 * (2.0 * y).cos());
        let a = fourier_projection(&one(base.clone()), 2).unwrap();
        let b = fourier_projection(&one(base.iter().map(|v| v + 0.01).collect()), 2).unwrap();
        assert_eq!(a.modes, b.modes);
        for (m, (x, y)) in a.modes.iter().zip(a.amplitudes[0].iter().zip(&b.amplitudes[0])) {
            if *m != [0, 0] {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tracked_mode_decays_at_the_homogenized_rate() {
        let m = HomogenizedModel2D::benchmark();
        let u0 = torus(32, |x, y| x.sin() * y.sin());
        let ts = [0.0, 0.1, 0.2];
        let states = solve_homogenized_2d(&m, &u0, 32, &ts).unwrap();
        let t = Trajectory::new(Source::Homogenized, MacroGrid::Torus { n: 32, origin: 0.0 }, ts.to_vec(), states).unwrap();
        let p = fourier_projection(&t, 1).unwrap();
        for (k, &tt) in ts.iter().enumerate() {
            let exact = 0.5 * (-(m.a_xx + m.a_yy) * tt).exp();
            assert!((p.amplitudes[k][0] - exact).abs() < 1e-10, "{} {exact}", p.amplitudes[k][0]);
        }
    }

    #[test]
    fn error_report_by_hand() {
        let r = line_traj(vec![vec![0.0, 2.0], vec![1.0, 1.0]]);
        let p = line_traj(vec![vec![1.0, 2.0], vec![1.0, 3.0]]);
        let e = error_report(std::slice::from_ref(&p), std::slice::from_ref(&r)).unwrap();
        assert_eq!(e.mse, vec![0.5, 2.0]);
        assert!((e.rmse[0] - 5.0 / 2.0).abs() < 1e-14);
        assert!((e.amplitude_error[0].1 - 0.5).abs() < 1e-14);
        let z = error_report(std::slice::from_ref(&r), std::slice::from_ref(&r)).unwrap();
        assert!(z.mse.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn spearman_extremes_and_ties() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() < 1e-14);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-14);
        assert!((spearman(&[1.0, 2.0, 2.0, 4.0], &[1.0, 3.0, 3.0, 2.0]).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!(spearman(&[1.0, 1.0], &[0.0, 2.0]).is_err());
    }
}
