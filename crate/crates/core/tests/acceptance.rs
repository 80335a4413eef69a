//! Acceptance criteria 1-8. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use patchlearn::equation_free::{coupling_polynomial, lift, restrict, LiftAnchor, ToothGrid1D};
use patchlearn::experiment::run::{
    evaluate_rhs, evaluate_rollouts, generate_dataset, reference_trajectory, simulate_trajectory, train_model, Split,
};
use patchlearn::experiment::{ExperimentConfig, SnapshotDataset};
use patchlearn::field::{EndValues, MacroField};
use patchlearn::homogenization::{effective_diffusivity, lattice_effective_diagonal, solve_cell_problem, HomogenizedModel2D};
use patchlearn::learner::{Architecture, Dense3, RhsModel};
use patchlearn::micro::{step_lattice_2d, step_micro_1d, Boundary, Diffusivity, LatticeProblem2D, LatticeScheme, MicroState1D};
use patchlearn::rollout::{rmse_states, MeanKind};
use patchlearn::spectral::Spectral2D;

struct Check {
    pass: bool,
    detail: String,
}

impl Check {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Check { pass, detail: detail.into() }
    }
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    ((value - target) / target).abs() <= rel
}

fn budget(elapsed: Duration, limit_s: f64) -> (bool, String) {
    let s = elapsed.as_secs_f64();
    (s < limit_s, format!("{s:.1}s of {limit_s:.0}s"))
}

fn effective_diffusivity_1d() -> Check {
    let start = Instant::now();
    let a = Diffusivity::benchmark().cell_samples(4096);
    let mut cell = solve_cell_problem(&a).unwrap();
    let a_star = effective_diffusivity(&mut cell, &a).unwrap();
    let (fast, time) = budget(start.elapsed(), 1.0);
    let exact = 0.21f64.sqrt();
    let d_exact = (a_star - exact).abs();
    let d_published = (a_star - 0.45825686).abs();
    Check::new(
        d_exact <= 1e-6 && d_published <= 2e-4 && fast,
        format!("a* = {a_star:.10}, |a* - sqrt(0.21)| = {d_exact:.2e} (<= 1e-6), |a* - 0.45825686| = {d_published:.2e} (<= 2e-4), {time}"),
    )
}

// Amplitude of Fourier mode (kx, ky) of a real field on the n x n torus.
fn mode_amplitude(fft: &Spectral2D, u: &[f64], n: usize, kx: usize, ky: usize) -> f64 {
    let c = fft.forward(u).unwrap();
    2.0 * c[ky * n + kx].norm() / (n * n) as f64
}

fn lattice_decay(problem: &LatticeProblem2D, along_x: bool, t1: f64, t2: f64) -> f64 {
    let n = problem.n;
    let h = problem.spacing();
    let mut u: Vec<f64> = (0..n * n)
        .map(|k| if along_x { ((k % n) as f64 * h).sin() } else { ((k / n) as f64 * h).sin() })
        .collect();
    let fft = Spectral2D::new(n, n);
    let (kx, ky) = if along_x { (1, 0) } else { (0, 1) };
    let mut t = 0.0;
    let mut amps = Vec::new();
    for target in [t1, t2] {
        let steps = ((target - t) / problem.stable_dt()).ceil() as usize;
        let dt = (target - t) / steps as f64;
        for _ in 0..steps {
            u = step_lattice_2d(&u, problem, dt, LatticeScheme::Rk4).unwrap();
        }
        t = target;
        amps.push(mode_amplitude(&fft, &u, n, kx, ky));
    }
    // rate of the lattice Laplacian symbol at k = 1
    let symbol = (2.0 - 2.0 * h.cos()) / (h * h);
    (amps[0] / amps[1]).ln() / (t2 - t1) / symbol
}

fn homogenized_coefficients_2d() -> Check {
    let start = Instant::now();
    let problem = LatticeProblem2D::benchmark(480).unwrap();
    let (t1, t2) = (0.002, 0.02);
    let a_xx = lattice_decay(&problem, true, t1, t2);
    let a_yy = lattice_decay(&problem, false, t1, t2);
    let (o_xx, o_yy) = lattice_effective_diagonal(&problem).unwrap();
    let published = HomogenizedModel2D::benchmark();
    let (fast, time) = budget(start.elapsed(), 300.0);
    let pass = within(a_xx, o_xx, 0.01)
        && within(a_yy, o_yy, 0.01)
        && within(published.a_xx, a_xx, 0.02)
        && within(published.a_yy, a_yy, 0.02)
        && fast;
    Check::new(
        pass,
        format!(
            "brute force A = ({a_xx:.4}, {a_yy:.4}), cell oracle ({o_xx:.4}, {o_yy:.4}) within 1%, \
             published ({:.4}, {:.4}) within 2%, {time}",
            published.a_xx, published.a_yy
        ),
    )
}

fn equation_free_fidelity() -> Check {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::default_1d();
    cfg.horizon = 0.5;
    cfg.sample_interval = 0.01;
    let mut worst: f64 = 0.0;
    let mut all = Vec::new();
    for k in 0..4 {
        let record = simulate_trajectory(&cfg, k).unwrap();
        let times: Vec<f64> = record.snapshots.iter().map(|s| s.t).collect();
        let reference = reference_trajectory(&cfg, &record, &times).unwrap();
        let states: Vec<Vec<f64>> = record.snapshots.iter().map(|s| s.u.clone()).collect();
        let e = rmse_states(&states, &reference.states, MeanKind::Grand).unwrap();
        worst = worst.max(e);
        all.push(format!("{e:.2e}"));
    }
    let (fast, time) = budget(start.elapsed(), 180.0);
    Check::new(worst <= 0.05 && fast, format!("rMSE per IC [{}], max {worst:.2e} (<= 0.05), {time}", all.join(", ")))
}

struct Trained {
    cfg: ExperimentConfig,
    test: SnapshotDataset,
    models: Vec<RhsModel>,
}

fn train_all(cfg: ExperimentConfig) -> Trained {
    let train = generate_dataset(&cfg, Split::Train).unwrap();
    let test = generate_dataset(&cfg, Split::Test).unwrap();
    let models = cfg.architectures.iter().map(|&a| train_model(&cfg, &train, a).unwrap().0).collect();
    Trained { cfg, test, models }
}

fn rhs_learning_1d(trained: &mut Option<Trained>) -> Check {
    let start = Instant::now();
    let t = trained.insert(train_all(ExperimentConfig::default_1d()));
    let mut pass = true;
    let mut parts = Vec::new();
    for model in &t.models {
        let m = evaluate_rhs(&t.cfg, model, &t.test).unwrap().metrics;
        pass &= m.rmse_truth <= 0.05;
        parts.push(format!("{} {:.2e}", model.architecture.name(), m.rmse_truth));
    }
    let (fast, time) = budget(start.elapsed(), 300.0);
    Check::new(pass && fast, format!("held-out rMSE vs a* D^2 U: {} (<= 0.05), {time}", parts.join(", ")))
}

fn rollout_1d(trained: &Option<Trained>) -> Check {
    let Some(t) = trained else {
        return Check::new(false, "no trained models");
    };
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for model in &t.models {
        let m = evaluate_rollouts(&t.cfg, model, &t.test, None).unwrap();
        let worst = m.rmse.iter().copied().fold(0.0, f64::max);
        pass &= worst <= 0.10 && !m.rmse.is_empty();
        parts.push(format!("{} {worst:.2e}", model.architecture.name()));
    }
    let (fast, time) = budget(start.elapsed(), 60.0);
    Check::new(pass && fast, format!("worst trajectory rMSE over [0, 1]: {} (<= 0.10), {time}", parts.join(", ")))
}

fn learning_2d(trained: &mut Option<Trained>) -> Check {
    let start = Instant::now();
    let t = trained.insert(train_all(ExperimentConfig::default_2d()));
    let mut pass = true;
    let mut parts = Vec::new();
    for model in &t.models {
        let m = evaluate_rhs(&t.cfg, model, &t.test).unwrap().metrics;
        pass &= m.relative_mse_data <= 0.10;
        parts.push(format!(
            "{} {:.3} (vs homogenized operator {:.3})",
            model.architecture.name(),
            m.relative_mse_data,
            m.relative_mse_truth
        ));
    }
    let (fast, time) = budget(start.elapsed(), 1200.0);
    Check::new(pass && fast, format!("held-out relative MSE: {} (<= 0.10), {time}", parts.join(", ")))
}

fn amplitude_trend_2d(trained: &Option<Trained>) -> Check {
    let Some(t) = trained else {
        return Check::new(false, "no trained models");
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for model in &t.models {
        let m = evaluate_rhs(&t.cfg, model, &t.test).unwrap().metrics;
        let rho = m.amplitude_error_spearman.unwrap_or(f64::NAN);
        pass &= rho <= -0.3;
        parts.push(format!("{} {rho:.3}", model.architecture.name()));
    }
    Check::new(pass, format!("Spearman(|dU/dt|, relative error): {} (<= -0.3)", parts.join(", ")))
}

fn gradient_check() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let net = Dense3::glorot([3, 8, 8, 1], &mut rng).unwrap();
    let x: Vec<f64> = (0..3 * 5).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut grad = vec![0.0; net.len()];
    net.loss_and_grad(&x, &y, &mut grad);
    let mut worst: f64 = 0.0;
    let mut scratch = vec![0.0; net.len()];
    for (p, &g) in grad.iter().enumerate() {
        let step = 1e-6;
        let mut plus = net.clone();
        plus.theta[p] += step;
        let mut minus = net.clone();
        minus.theta[p] -= step;
        let fd = (plus.loss_and_grad(&x, &y, &mut scratch) - minus.loss_and_grad(&x, &y, &mut scratch)) / (2.0 * step);
        worst = worst.max((fd - g).abs() / g.abs().max(1e-3));
    }
    (worst < 1e-6, format!("gradient {worst:.1e}"))
}

fn conservation_check() -> (bool, String) {
    let dx = 1e-3;
    let mut state = MicroState1D::sample(0.0, dx, 201, |x| (7.0 * x).sin() + x * x);
    let a: Vec<f64> = (0..200).map(|i| 1.1 + (((i as f64) + 0.5) * 0.3).sin()).collect();
    let wall = Boundary::Neumann { flux: 0.0 };
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let next = step_micro_1d(&state, &a, wall, wall, 1e-6, 0.5).unwrap();
        worst = worst.max((next.mass() - state.mass()).abs() / state.mass().abs());
        state = next;
    }
    let problem = LatticeProblem2D::benchmark(12).unwrap();
    let mut u: Vec<f64> = (0..144).map(|k| ((k * 37 % 11) as f64).cos()).collect();
    let sum0: f64 = u.iter().sum();
    let mut lattice: f64 = 0.0;
    for _ in 0..100 {
        u = step_lattice_2d(&u, &problem, problem.stable_dt(), LatticeScheme::Rk4).unwrap();
        lattice = lattice.max((u.iter().sum::<f64>() - sum0).abs() / u.iter().map(|v| v.abs()).sum::<f64>());
    }
    (worst < 1e-12 && lattice < 1e-12, format!("mass drift {worst:.1e}/{lattice:.1e}"))
}

fn tooth_grid(k: usize) -> ToothGrid1D {
    ToothGrid1D {
        x_lo: 0.0,
        x_hi: 1.0,
        teeth: 10,
        tooth_width: 0.01,
        buffer_width: 0.04,
        coupling_degree: k,
        lift_degree: 2,
    }
}

// Macro data holding the exact core averages of a polynomial with the given
// monomial coefficients.
fn averaged(coeffs: &[f64], grid: &ToothGrid1D) -> (MacroField, EndValues) {
    let antider = |x: f64| coeffs.iter().enumerate().map(|(m, c)| c * x.powi(m as i32 + 1) / (m + 1) as f64).sum::<f64>();
    let eval = |x: f64| coeffs.iter().enumerate().map(|(m, c)| c * x.powi(m as i32)).sum::<f64>();
    let h = grid.tooth_width;
    let values = (0..grid.teeth)
        .map(|i| {
            let c = grid.center(i);
            (antider(c + 0.5 * h) - antider(c - 0.5 * h)) / h
        })
        .collect();
    (
        MacroField::new(grid.macro_grid(), values, 0.0).unwrap(),
        EndValues { left: eval(grid.x_lo), right: eval(grid.x_hi) },
    )
}

fn coupling_exactness_check() -> (bool, String) {
    let mut worst: f64 = 0.0;
    for k in [2, 4] {
        let grid = tooth_grid(k);
        let coeffs: Vec<f64> = (0..=k).map(|m| 1.0 + 0.5 * m as f64).collect();
        let (u, ends) = averaged(&coeffs, &grid);
        for i in 0..grid.teeth {
            let p = coupling_polynomial(&u, Some(ends), &grid, i, k).unwrap();
            for x in [grid.center(i) - 0.02, grid.center(i), grid.center(i) + 0.02] {
                let exact: f64 = coeffs.iter().enumerate().map(|(m, c)| c * x.powi(m as i32)).sum();
                worst = worst.max((p.eval(x) - exact).abs() / exact.abs().max(1.0));
            }
        }
    }
    (worst < 1e-8, format!("coupling {worst:.1e}"))
}

fn restrict_lift_check() -> (bool, String) {
    let grid = tooth_grid(2);
    let (u, ends) = averaged(&[0.3, -1.7], &grid);
    let mut worst: f64 = 0.0;
    for anchor in [LiftAnchor::Point, LiftAnchor::BoxAverage] {
        let states: Vec<MicroState1D> =
            (0..grid.teeth).map(|i| lift(&u, Some(ends), &grid, i, 1e-4, anchor).unwrap()).collect();
        let back = restrict(&states, &grid).unwrap();
        for (a, b) in back.values.iter().zip(&u.values) {
            worst = worst.max((a - b).abs());
        }
    }
    (worst < 1e-12, format!("restrict-lift {worst:.1e}"))
}

fn rmse_axioms_check() -> (bool, String) {
    let truth = vec![vec![1.0, 3.0, -2.0], vec![0.5, 4.0, 2.5]];
    let zero = rmse_states(&truth, &truth, MeanKind::Grand).unwrap();
    let mean = truth.iter().flatten().sum::<f64>() / 6.0;
    let flat = vec![vec![mean; 3]; 2];
    let one = rmse_states(&flat, &truth, MeanKind::Grand).unwrap();
    (zero == 0.0 && (one - 1.0).abs() < 1e-14, format!("rMSE {zero:.1e}/{one:.6}"))
}

fn determinism_check() -> (bool, String) {
    let mut cfg = ExperimentConfig::smoke_1d();
    cfg.horizon = 0.05;
    cfg.train.max_epochs = 3;
    let a = generate_dataset(&cfg, Split::Train).unwrap();
    let b = generate_dataset(&cfg, Split::Train).unwrap();
    let same_data = a.to_csv() == b.to_csv() && a.sidecar_json().unwrap() == b.sidecar_json().unwrap();
    let ma = train_model(&cfg, &a, Architecture::Mlp).unwrap().0.to_json().unwrap();
    let mb = train_model(&cfg, &b, Architecture::Mlp).unwrap().0.to_json().unwrap();
    (same_data && ma == mb, format!("determinism data={same_data} model={}", ma == mb))
}

fn property_suites() -> Check {
    let results = [
        gradient_check(),
        conservation_check(),
        coupling_exactness_check(),
        restrict_lift_check(),
        rmse_axioms_check(),
        determinism_check(),
    ];
    let pass = results.iter().all(|r| r.0);
    let detail = results.iter().map(|r| format!("{}{}", r.1, if r.0 { "" } else { " FAILED" })).collect::<Vec<_>>();
    Check::new(pass, detail.join("; "))
}

fn guarded(f: impl FnOnce() -> Check) -> Check {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Check::new(false, format!("panicked: {msg}"))
    })
}

fn main() {
    let mut line: Option<Trained> = None;
    let mut lattice: Option<Trained> = None;
    let mut failed = 0;
    let mut report = |n: usize, name: &str, c: Check| {
        println!("criterion {n} [{}] {name}: {}", if c.pass { "PASS" } else { "FAIL" }, c.detail);
        if !c.pass {
            failed += 1;
        }
    };
    report(1, "effective diffusivity 1D", guarded(effective_diffusivity_1d));
    report(2, "homogenized coefficients 2D", guarded(homogenized_coefficients_2d));
    report(3, "equation-free fidelity 1D", guarded(equation_free_fidelity));
    report(4, "RHS learning 1D", guarded(|| rhs_learning_1d(&mut line)));
    report(5, "rollout 1D", guarded(|| rollout_1d(&line)));
    report(6, "RHS learning 2D", guarded(|| learning_2d(&mut lattice)));
    report(7, "error-amplitude trend 2D", guarded(|| amplitude_trend_2d(&lattice)));
    report(8, "property suites", guarded(property_suites));
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
