//! The experiment stages: generate, train, evaluate, roll out, report.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::{ExperimentConfig, Hetero1D, Problem, SimulationMode};
use super::dataset::{sha256_hex, DatasetProvenance, InitialCondition, SnapshotDataset, TrajectoryRecord};
use super::ic::{random_ic_1d, random_ic_2d};
use super::manifest::Manifest;
use super::rng::{stream, Purpose};
use crate::equation_free::{simulate_gap_tooth_1d, simulate_gap_tooth_2d, simulate_patch_dynamics_1d};
use crate::error::{input, Error, Result};
use crate::features::{pad_line, spectral_derivative};
use crate::field::{EndValues, MacroField, MacroGrid};
use crate::homogenization::{
    effective_diffusivity, lattice_effective_diagonal, reference_grid, solve_cell_problem, solve_homogenized_1d,
    solve_homogenized_2d, HomogenizedModel1D, HomogenizedModel2D,
};
use crate::learner::{input_width, model_inputs, train, Architecture, LossHistory, ModelSpec, Padding, Provenance, RhsModel, TrainingSet};
use crate::micro::{Boundary, DetailedProblem1D, LatticeProblem2D};
use crate::rollout::{
    amplitude_errors, error_report, fourier_projection, integrate_learned, relative_mse, rmse_states, spearman, MeanKind,
    Source, Trajectory,
};
use crate::spectral::Spectral2D;

/// File layout of an output directory.
#[derive(Clone, Debug)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }
    pub fn config(&self) -> PathBuf {
        self.root.join("config.toml")
    }
    pub fn oracle(&self) -> PathBuf {
        self.root.join("oracle.json")
    }
    pub fn train_data(&self) -> PathBuf {
        self.root.join("datasets/train.csv")
    }
    pub fn test_data(&self) -> PathBuf {
        self.root.join("datasets/test.csv")
    }
    pub fn model(&self, a: Architecture) -> PathBuf {
        self.root.join(format!("models/{}.json", a.name()))
    }
    pub fn metric(&self, stem: &str, a: Architecture) -> PathBuf {
        self.root.join(format!("metrics/{stem}_{}.csv", a.name()))
    }
    pub fn summary(&self, stage: &str) -> PathBuf {
        self.root.join(format!("metrics/{stage}.json"))
    }
    pub fn report(&self) -> PathBuf {
        self.root.join("report.json")
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Which trajectories a dataset holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    /// Trajectory numbers; test indices follow the training ones so the two
    /// never share a seed stream.
    pub fn indices(self, cfg: &ExperimentConfig) -> std::ops::Range<usize> {
        match self {
            Split::Train => 0..cfg.train_trajectories,
            Split::Test => cfg.train_trajectories..cfg.train_trajectories + cfg.test_trajectories,
        }
    }
}

fn detailed_problem(p: &Hetero1D, ends: EndValues) -> DetailedProblem1D {
    DetailedProblem1D {
        diffusivity: p.diffusivity.clone(),
        epsilon: p.epsilon,
        x_lo: p.patch.teeth.x_lo,
        x_hi: p.patch.teeth.x_hi,
        left: Boundary::Dirichlet { value: ends.left },
        right: Boundary::Dirichlet { value: ends.right },
    }
}

/// The macro grid of a configuration.
pub fn macro_grid(cfg: &ExperimentConfig) -> Result<MacroGrid> {
    match &cfg.problem {
        Problem::Hetero1d(p) => Ok(p.patch.teeth.macro_grid()),
        Problem::Lattice2d(p) => Ok(p.patch_grid()?.macro_grid()),
    }
}

/// Simulates trajectory `index` with its own seed stream.
pub fn simulate_trajectory(cfg: &ExperimentConfig, index: usize) -> Result<TrajectoryRecord> {
    let mut rng = stream(cfg.seed, Purpose::InitialCondition, index as u32);
    match &cfg.problem {
        Problem::Hetero1d(p) => {
            let ic = random_ic_1d(&p.initial, &mut rng);
            let teeth = &p.patch.teeth;
            let ends = EndValues { left: ic.eval(teeth.x_lo), right: ic.eval(teeth.x_hi) };
            let u0 = MacroField::new(teeth.macro_grid(), (0..teeth.teeth).map(|i| ic.eval(teeth.center(i))).collect(), 0.0)?;
            let problem = detailed_problem(p, ends);
            let series = match p.mode {
                SimulationMode::PatchDynamics => {
                    simulate_patch_dynamics_1d(&p.patch, &problem, &u0, Some(ends), cfg.horizon, cfg.sample_interval)?
                }
                SimulationMode::GapTooth => simulate_gap_tooth_1d(
                    teeth,
                    &problem,
                    &u0,
                    Some(ends),
                    p.patch.micro_dx,
                    p.patch.micro_dt,
                    cfg.horizon,
                    cfg.sample_interval,
                )?,
            };
            Ok(TrajectoryRecord { index, ends: Some(ends), initial: InitialCondition::Line(ic), snapshots: series.snapshots })
        }
        Problem::Lattice2d(p) => {
            let ic = random_ic_2d(&p.initial, &mut rng);
            let grid = p.patch_grid()?;
            let series =
                simulate_gap_tooth_2d(&grid, &p.stepper, |x, y| ic.eval(x, y), p.heal_time, cfg.horizon, cfg.sample_interval)?;
            Ok(TrajectoryRecord { index, ends: None, initial: InitialCondition::Torus(ic), snapshots: series.snapshots })
        }
    }
}

fn scheme_name(cfg: &ExperimentConfig) -> &'static str {
    match &cfg.problem {
        Problem::Hetero1d(p) if p.mode == SimulationMode::PatchDynamics => "patch_dynamics_1d",
        Problem::Hetero1d(_) => "gap_tooth_1d",
        Problem::Lattice2d(_) => "gap_tooth_2d",
    }
}

/// Simulates every trajectory of a split.
pub fn generate_dataset(cfg: &ExperimentConfig, split: Split) -> Result<SnapshotDataset> {
    let trajectories = split.indices(cfg).map(|k| simulate_trajectory(cfg, k)).collect::<Result<Vec<_>>>()?;
    Ok(SnapshotDataset {
        grid: macro_grid(cfg)?,
        provenance: DatasetProvenance {
            scheme: scheme_name(cfg).into(),
            config_sha256: sha256_hex(cfg.to_toml().as_bytes()),
            seed: cfg.seed,
        },
        trajectories,
    })
}

/// Input layout of an architecture under a configuration.
pub fn model_spec(cfg: &ExperimentConfig, arch: Architecture) -> Result<ModelSpec> {
    let grid = macro_grid(cfg)?;
    let padding = if grid.is_periodic() { Padding::Periodic } else { Padding::EndValue };
    let features = (arch == Architecture::Mlp).then(|| cfg.features.clone());
    Ok(ModelSpec { architecture: arch, features, padding, grid })
}

/// Regression rows of a dataset for one architecture.
pub fn training_set(cfg: &ExperimentConfig, data: &SnapshotDataset, spec: &ModelSpec) -> Result<TrainingSet> {
    let width = input_width(spec.architecture, &data.grid, spec.features.as_ref())?;
    let mut set = TrainingSet::new(width);
    let n = data.grid.len();
    let keep = |k: usize| cfg.include_boundary_rows || data.grid.is_periodic() || (k > 0 && k + 1 < n);
    for tr in &data.trajectories {
        for s in tr.snapshots.iter().step_by(cfg.snapshot_stride) {
            let field = MacroField::new(data.grid, s.u.clone(), s.t)?;
            let x = model_inputs(spec.architecture, spec.features.as_ref(), spec.padding, &field, tr.ends)?;
            for k in (0..n).filter(|&k| keep(k)) {
                set.push_rows(&x[k * width..(k + 1) * width], &s.dudt[k..k + 1])?;
            }
        }
    }
    Ok(set)
}

fn arch_stream(arch: Architecture) -> u32 {
    match arch {
        Architecture::Mlp => 0,
        Architecture::Stencil => 1,
    }
}

/// Trains one architecture on a training dataset.
pub fn train_model(cfg: &ExperimentConfig, data: &SnapshotDataset, arch: Architecture) -> Result<(RhsModel, LossHistory)> {
    let spec = model_spec(cfg, arch)?;
    let set = training_set(cfg, data, &spec)?;
    let provenance = Provenance {
        dataset_sha256: sha256_hex(data.to_csv().as_bytes()),
        seed: cfg.seed,
        train_config: serde_json::to_value(&cfg.train)?,
    };
    let mut rng = stream(cfg.seed, Purpose::Training, arch_stream(arch));
    train(&spec, &set, &cfg.train, &mut rng, provenance)
}

/// Effective coefficients used as ground truth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Truth {
    Line(HomogenizedModel1D),
    Torus(HomogenizedModel2D),
}

pub fn truth(cfg: &ExperimentConfig) -> Result<Truth> {
    match &cfg.problem {
        Problem::Hetero1d(p) => {
            let a = p.diffusivity.cell_samples(4096);
            let mut cell = solve_cell_problem(&a)?;
            let a_star = effective_diffusivity(&mut cell, &a)?;
            Ok(Truth::Line(HomogenizedModel1D { a_star, x_lo: p.patch.teeth.x_lo, x_hi: p.patch.teeth.x_hi }))
        }
        Problem::Lattice2d(_) => Ok(Truth::Torus(HomogenizedModel2D::benchmark())),
    }
}

/// Homogenized right-hand side evaluated on a macro field: `a* D^2 U` with
/// end-value ghosts on lines, `A_xx U_xx + A_yy U_yy` by FFT on tori.
pub fn homogenized_rate(truth: &Truth, field: &MacroField, ends: Option<EndValues>) -> Result<Vec<f64>> {
    match (truth, field.grid) {
        (Truth::Line(m), MacroGrid::Line { .. }) => {
            let e = ends.ok_or_else(|| Error::Input("line rates need end values".into()))?;
            let p = pad_line(&field.values, e, 1)?;
            let c = m.a_star / field.grid.spacing().powi(2);
            Ok(p.windows(3).map(|w| c * (w[0] - 2.0 * w[1] + w[2])).collect())
        }
        (Truth::Torus(m), MacroGrid::Torus { n, .. }) => {
            let fft = Spectral2D::new(n, n);
            let c = fft.forward(&field.values)?;
            let uxx = spectral_derivative(&fft, &c, 2, 0)?;
            let uyy = spectral_derivative(&fft, &c, 0, 2)?;
            Ok(uxx.iter().zip(&uyy).map(|(a, b)| m.a_xx * a + m.a_yy * b).collect())
        }
        _ => input("truth model does not match the grid"),
    }
}

/// Right-hand-side accuracy of one model on held-out snapshots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhsMetrics {
    pub architecture: Architecture,
    pub snapshots: usize,
    /// rMSE against the recorded equation-free rates.
    pub rmse_data: f64,
    /// rMSE against the homogenized operator applied to `U`.
    pub rmse_truth: f64,
    /// `|pred - data|^2 / |data|^2`.
    pub relative_mse_data: f64,
    /// `|pred - truth|^2 / |truth|^2`.
    pub relative_mse_truth: f64,
    /// Equation-free rates against the homogenized operator.
    pub relative_mse_data_vs_truth: f64,
    /// Rank correlation of snapshot rate norm and relative prediction error.
    pub amplitude_error_spearman: Option<f64>,
}

/// Per-point predictions plus aggregate metrics.
pub struct RhsEvaluation {
    pub metrics: RhsMetrics,
    pub csv: String,
    pub amplitude_csv: String,
}

pub fn evaluate_rhs(cfg: &ExperimentConfig, model: &RhsModel, data: &SnapshotDataset) -> Result<RhsEvaluation> {
    let truth_model = truth(cfg)?;
    let grid = data.grid;
    let n = grid.side();
    let coords = grid.coords();
    let mut pred_all = Vec::new();
    let mut data_all = Vec::new();
    let mut truth_all = Vec::new();
    let mut csv = String::new();
    let mut amp_csv = String::from("trajectory,t,rate_norm,relative_error\n");
    if grid.is_periodic() {
        csv.push_str("trajectory,t,i,j,x,y,U,dUdt,truth,prediction\n");
    } else {
        csv.push_str("trajectory,t,i,x,U,dUdt,truth,prediction\n");
    }
    for tr in &data.trajectories {
        for s in &tr.snapshots {
            let field = MacroField::new(grid, s.u.clone(), s.t)?;
            let p = model.predict(&field, tr.ends)?;
            let t = homogenized_rate(&truth_model, &field, tr.ends)?;
            for k in 0..grid.len() {
                if grid.is_periodic() {
                    let (i, j) = (k % n, k / n);
                    let _ = writeln!(
                        csv,
                        "{},{:.16e},{i},{j},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                        tr.index, s.t, coords[i], coords[j], s.u[k], s.dudt[k], t[k], p[k]
                    );
                } else {
                    let _ = writeln!(
                        csv,
                        "{},{:.16e},{k},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                        tr.index, s.t, coords[k], s.u[k], s.dudt[k], t[k], p[k]
                    );
                }
            }
            if let Some(&(norm, err)) = amplitude_errors(std::slice::from_ref(&p), std::slice::from_ref(&s.dudt))?.first() {
                let _ = writeln!(amp_csv, "{},{:.16e},{norm:.16e},{err:.16e}", tr.index, s.t);
            }
            pred_all.push(p);
            data_all.push(s.dudt.clone());
            truth_all.push(t);
        }
    }
    let flat = |v: &[Vec<f64>]| v.iter().flatten().copied().collect::<Vec<f64>>();
    let (pf, df, tf) = (flat(&pred_all), flat(&data_all), flat(&truth_all));
    let pairs = amplitude_errors(&pred_all, &data_all)?;
    let (norms, errs): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let metrics = RhsMetrics {
        architecture: model.architecture,
        snapshots: pred_all.len(),
        rmse_data: rmse_states(&pred_all, &data_all, MeanKind::Grand)?,
        rmse_truth: rmse_states(&pred_all, &truth_all, MeanKind::Grand)?,
        relative_mse_data: relative_mse(&pf, &df)?,
        relative_mse_truth: relative_mse(&pf, &tf)?,
        relative_mse_data_vs_truth: relative_mse(&df, &tf)?,
        amplitude_error_spearman: spearman(&norms, &errs).ok(),
    };
    Ok(RhsEvaluation { metrics, csv, amplitude_csv: amp_csv })
}

/// Homogenized reference trajectory from a record's initial condition,
/// sampled on the macro grid at `times`.
pub fn reference_trajectory(cfg: &ExperimentConfig, record: &TrajectoryRecord, times: &[f64]) -> Result<Trajectory> {
    let grid = macro_grid(cfg)?;
    let states = match (truth(cfg)?, &record.initial, &cfg.problem) {
        (Truth::Line(m), InitialCondition::Line(ic), Problem::Hetero1d(p)) => {
            let xs = reference_grid(m.x_lo, m.x_hi, p.reference_dx);
            let u0: Vec<f64> = xs.iter().map(|&x| ic.eval(x)).collect();
            let sol = solve_homogenized_1d(&m, &u0, times)?;
            let h = xs[1] - xs[0];
            let at = |s: &[f64], x: f64| {
                let r = (x - xs[0]) / h;
                let k = (r.floor() as usize).min(xs.len() - 2);
                let w = r - k as f64;
                (1.0 - w) * s[k] + w * s[k + 1]
            };
            let centres = grid.coords();
            sol.iter().map(|s| centres.iter().map(|&x| at(s, x)).collect()).collect()
        }
        (Truth::Torus(m), InitialCondition::Torus(ic), Problem::Lattice2d(_)) => {
            let c = grid.coords();
            let n = grid.side();
            let u0: Vec<f64> = (0..n * n).map(|k| ic.eval(c[k % n], c[k / n])).collect();
            solve_homogenized_2d(&m, &u0, n, times)?
        }
        _ => return input("initial condition does not match the problem"),
    };
    Trajectory::new(Source::Homogenized, grid, times.to_vec(), states)
}

/// Learned rollout from the initial condition sampled on the macro grid.
pub fn learned_trajectory(cfg: &ExperimentConfig, model: &RhsModel, record: &TrajectoryRecord, times: &[f64]) -> Result<Trajectory> {
    let reference = reference_trajectory(cfg, record, &times[..1])?;
    let u0 = MacroField::new(reference.grid, reference.states[0].clone(), times[0])?;
    integrate_learned(model, &u0, record.ends, times, &cfg.rollout)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutMetrics {
    pub architecture: Architecture,
    pub trajectories: Vec<usize>,
    /// Learned rollout against the homogenized reference.
    pub rmse: Vec<f64>,
    /// Equation-free trajectory against the same reference.
    pub equation_free_rmse: Vec<f64>,
}

/// Rolls out the first `rollout_trajectories` test trajectories.
pub fn evaluate_rollouts(cfg: &ExperimentConfig, model: &RhsModel, test: &SnapshotDataset, layout: Option<&Layout>) -> Result<RolloutMetrics> {
    let grid = test.grid;
    let n = grid.side();
    let coords = grid.coords();
    let mut csv = if grid.is_periodic() {
        String::from("trajectory,t,i,j,x,y,reference,equation_free,learned\n")
    } else {
        String::from("trajectory,t,i,x,reference,equation_free,learned\n")
    };
    let mut fourier = String::from("trajectory,source,t,rank,kx,ky,amplitude\n");
    let mut refs = Vec::new();
    let mut preds = Vec::new();
    let mut metrics = RolloutMetrics { architecture: model.architecture, trajectories: Vec::new(), rmse: Vec::new(), equation_free_rmse: Vec::new() };
    for record in test.trajectories.iter().take(cfg.rollout_trajectories) {
        let times: Vec<f64> = record.snapshots.iter().map(|s| s.t).collect();
        let reference = reference_trajectory(cfg, record, &times)?;
        let learned = learned_trajectory(cfg, model, record, &times)?;
        let ef: Vec<Vec<f64>> = record.snapshots.iter().map(|s| s.u.clone()).collect();
        metrics.trajectories.push(record.index);
        metrics.rmse.push(rmse_states(&learned.states, &reference.states, MeanKind::Grand)?);
        metrics.equation_free_rmse.push(rmse_states(&ef, &reference.states, MeanKind::Grand)?);
        for (s, t) in times.iter().enumerate() {
            for k in 0..grid.len() {
                let (r, e, l) = (reference.states[s][k], ef[s][k], learned.states[s][k]);
                if grid.is_periodic() {
                    let (i, j) = (k % n, k / n);
                    let _ = writeln!(csv, "{},{t:.16e},{i},{j},{:.16e},{:.16e},{r:.16e},{e:.16e},{l:.16e}", record.index, coords[i], coords[j]);
                } else {
                    let _ = writeln!(csv, "{},{t:.16e},{k},{:.16e},{r:.16e},{e:.16e},{l:.16e}", record.index, coords[k]);
                }
            }
        }
        if grid.is_periodic() {
            let m = cfg.fourier_modes;
            let modes = fourier_projection(&reference, m)?.modes;
            let eft = Trajectory::new(Source::GapTooth, grid, times.clone(), ef)?;
            for (name, traj) in [("homogenized", &reference), ("equation_free", &eft), (model.architecture.name(), &learned)] {
                let amps = tracked_amplitudes(traj, &modes)?;
                for (s, t) in times.iter().enumerate() {
                    for (rank, (mode, a)) in modes.iter().zip(&amps[s]).enumerate() {
                        let _ = writeln!(fourier, "{},{name},{t:.16e},{rank},{},{},{a:.16e}", record.index, mode[0], mode[1]);
                    }
                }
            }
        }
        refs.push(reference);
        preds.push(learned);
    }
    if let Some(layout) = layout {
        let arch = model.architecture;
        write_file(&layout.metric("rollout", arch), &csv)?;
        if !refs.is_empty() {
            let report = error_report(&preds, &refs)?;
            let mut mse = String::from("t,mse\n");
            for (t, v) in report.times.iter().zip(&report.mse) {
                let _ = writeln!(mse, "{t:.16e},{v:.16e}");
            }
            write_file(&layout.metric("rollout_mse", arch), &mse)?;
        }
        if grid.is_periodic() {
            write_file(&layout.metric("fourier", arch), &fourier)?;
        }
    }
    Ok(metrics)
}

/// Amplitudes of fixed modes along a trajectory (real convention).
fn tracked_amplitudes(traj: &Trajectory, modes: &[[i64; 2]]) -> Result<Vec<Vec<f64>>> {
    let n = traj.grid.side();
    let fft = Spectral2D::new(n, n);
    let norm = (n * n) as f64;
    let wrap = |k: i64| k.rem_euclid(n as i64) as usize;
    traj.states
        .iter()
        .map(|s| {
            let c = fft.forward(s)?;
            Ok(modes
                .iter()
                .map(|m| {
                    let (kx, ky) = (wrap(m[0]), wrap(m[1]));
                    let own = (n - kx) % n == kx && (n - ky) % n == ky;
                    c[ky * n + kx].norm() / norm * if own { 1.0 } else { 2.0 }
                })
                .collect())
        })
        .collect()
}

/// Effective coefficients from the cell problems.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub a_star_cell: Option<f64>,
    pub a_star_harmonic: Option<f64>,
    pub lattice_a_xx: Option<f64>,
    pub lattice_a_yy: Option<f64>,
    pub benchmark_a_xx: Option<f64>,
    pub benchmark_a_yy: Option<f64>,
}

pub fn oracle(cfg: &ExperimentConfig) -> Result<OracleReport> {
    let mut r = OracleReport {
        a_star_cell: None,
        a_star_harmonic: None,
        lattice_a_xx: None,
        lattice_a_yy: None,
        benchmark_a_xx: None,
        benchmark_a_yy: None,
    };
    match &cfg.problem {
        Problem::Hetero1d(p) => {
            let a = p.diffusivity.cell_samples(4096);
            let mut cell = solve_cell_problem(&a)?;
            r.a_star_cell = Some(effective_diffusivity(&mut cell, &a)?);
            // midpoint quadrature of the harmonic mean on a fine grid
            let fine = p.diffusivity.cell_samples(1 << 16);
            r.a_star_harmonic = Some(fine.len() as f64 / fine.iter().map(|v| 1.0 / v).sum::<f64>());
        }
        Problem::Lattice2d(_) => {
            let lattice = LatticeProblem2D::benchmark(3)?;
            let (ax, ay) = lattice_effective_diagonal(&lattice)?;
            r.lattice_a_xx = Some(ax);
            r.lattice_a_yy = Some(ay);
            let b = HomogenizedModel2D::benchmark();
            r.benchmark_a_xx = Some(b.a_xx);
            r.benchmark_a_yy = Some(b.a_yy);
        }
    }
    Ok(r)
}

/// The stages in execution order.
pub const STAGES: [&str; 6] = ["oracle", "generate", "train", "evaluate", "rollout", "report"];

fn load_models(cfg: &ExperimentConfig, layout: &Layout) -> Result<Vec<RhsModel>> {
    cfg.architectures.iter().map(|&a| RhsModel::from_json(&std::fs::read_to_string(layout.model(a))?)).collect()
}

/// Runs one stage against an output directory.
pub fn run_stage(cfg: &ExperimentConfig, layout: &Layout, stage: &str) -> Result<()> {
    cfg.validate()?;
    std::fs::create_dir_all(&layout.root)?;
    write_file(&layout.config(), &cfg.to_toml())?;
    match stage {
        "oracle" => write_json(&layout.oracle(), &oracle(cfg)?),
        "generate" => {
            generate_dataset(cfg, Split::Train)?.write(&layout.train_data())?;
            generate_dataset(cfg, Split::Test)?.write(&layout.test_data())?;
            Ok(())
        }
        "train" => {
            let data = SnapshotDataset::read(&layout.train_data())?;
            let mut summary = Vec::new();
            for &arch in &cfg.architectures {
                let (model, history) = train_model(cfg, &data, arch)?;
                write_file(&layout.model(arch), &(model.to_json()? + "\n"))?;
                let mut csv = String::from("epoch,train,validation\n");
                for (e, (t, v)) in history.train.iter().zip(&history.validation).enumerate() {
                    let _ = writeln!(csv, "{e},{t:.16e},{v:.16e}");
                }
                write_file(&layout.metric("loss", arch), &csv)?;
                summary.push(serde_json::json!({
                    "architecture": arch,
                    "epochs": history.train.len(),
                    "best_epoch": history.best_epoch,
                    "best_validation_mse": history.validation[history.best_epoch],
                }));
            }
            write_json(&layout.summary("train"), &summary)
        }
        "evaluate" => {
            let test = SnapshotDataset::read(&layout.test_data())?;
            let mut summary = Vec::new();
            for model in load_models(cfg, layout)? {
                let ev = evaluate_rhs(cfg, &model, &test)?;
                write_file(&layout.metric("rhs", model.architecture), &ev.csv)?;
                write_file(&layout.metric("amplitude_error", model.architecture), &ev.amplitude_csv)?;
                summary.push(ev.metrics);
            }
            write_json(&layout.summary("evaluate"), &summary)
        }
        "rollout" => {
            let test = SnapshotDataset::read(&layout.test_data())?;
            let mut summary = Vec::new();
            for model in load_models(cfg, layout)? {
                summary.push(evaluate_rollouts(cfg, &model, &test, Some(layout))?);
            }
            write_json(&layout.summary("rollout"), &summary)
        }
        "report" => {
            let mut report = serde_json::Map::new();
            report.insert("name".into(), cfg.name.clone().into());
            report.insert("seed".into(), cfg.seed.into());
            for (key, path) in [
                ("oracle", layout.oracle()),
                ("train", layout.summary("train")),
                ("evaluate", layout.summary("evaluate")),
                ("rollout", layout.summary("rollout")),
            ] {
                if path.exists() {
                    report.insert(key.into(), read_json::<serde_json::Value>(&path)?);
                }
            }
            write_json(&layout.report(), &report)
        }
        other => Err(Error::Config(format!("unknown stage `{other}`"))),
    }
}

/// Runs `stages` in order, recording each in the manifest. A failing stage
/// stops the run; the manifest then lists whatever was written so far.
pub fn run_stages(cfg: &ExperimentConfig, layout: &Layout, stages: &[&str]) -> Result<Manifest> {
    std::fs::create_dir_all(&layout.root)?;
    let mut manifest = Manifest::read(&layout.root)?;
    for &stage in stages {
        let outcome = run_stage(cfg, layout, stage);
        manifest.record(stage, outcome.as_ref().err().map(|e| e.to_string()));
        manifest.refresh(&layout.root)?;
        if let Err(e) = outcome {
            return Err(Error::Stage { stage: stage.to_string(), source: Box::new(e) });
        }
    }
    Ok(manifest)
}

/// Every stage.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<Manifest> {
    run_stages(cfg, &Layout::new(out), &STAGES)
}
