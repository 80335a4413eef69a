//! Experiment configuration and presets.

use serde::{Deserialize, Serialize};

use super::ic::{IcSpec1D, IcSpec2D};
use crate::equation_free::{GhostCoupling, LiftAnchor, PatchConfig, PatchGrid2D, PatchStepper, ProjectiveMethod, ToothGrid1D};
use crate::error::{config, Result};
use crate::features::FeatureSpec;
use crate::learner::{Architecture, TrainConfig};
use crate::micro::{Diffusivity, LatticeProblem2D};
use crate::rollout::RolloutConfig;

/// Which equation-free scheme generates 1D data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationMode {
    PatchDynamics,
    GapTooth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hetero1D {
    pub diffusivity: Diffusivity,
    pub epsilon: f64,
    pub patch: PatchConfig,
    pub mode: SimulationMode,
    /// Spacing of the homogenized reference solver.
    pub reference_dx: f64,
    pub initial: IcSpec1D,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lattice2D {
    /// Lattice sites per side of `[0, 2 pi)`.
    pub sites: usize,
    pub patches: usize,
    pub core: usize,
    pub coupling: GhostCoupling,
    pub stepper: PatchStepper,
    /// Mean-preserving relaxation before the first record.
    pub heal_time: f64,
    pub initial: IcSpec2D,
}

impl Lattice2D {
    pub fn patch_grid(&self) -> Result<PatchGrid2D> {
        let g = PatchGrid2D {
            lattice: LatticeProblem2D::benchmark(self.sites)?,
            patches: self.patches,
            core: self.core,
            coupling: self.coupling,
        };
        g.validate()?;
        Ok(g)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Problem {
    Hetero1d(Hetero1D),
    Lattice2d(Lattice2D),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub problem: Problem,
    pub train_trajectories: usize,
    pub test_trajectories: usize,
    pub horizon: f64,
    pub sample_interval: f64,
    pub features: FeatureSpec,
    pub architectures: Vec<Architecture>,
    pub train: TrainConfig,
    /// Use boundary teeth as training rows (1D).
    pub include_boundary_rows: bool,
    /// Train on every `snapshot_stride`-th snapshot.
    pub snapshot_stride: usize,
    pub rollout: RolloutConfig,
    /// Test trajectories that are rolled out with the learned models.
    pub rollout_trajectories: usize,
    /// Fourier modes tracked in 2D rollouts.
    pub fourier_modes: usize,
}

fn tooth_grid(tooth_width: f64, buffer_width: f64) -> ToothGrid1D {
    ToothGrid1D { x_lo: 0.0, x_hi: 1.0, teeth: 10, tooth_width, buffer_width, coupling_degree: 2, lift_degree: 2 }
}

impl ExperimentConfig {
    /// 1D heterogeneous medium at `eps = 1e-3`, full training protocol.
    pub fn default_1d() -> Self {
        ExperimentConfig {
            name: "hetero-1d".into(),
            seed: 20190410,
            problem: Problem::Hetero1d(Hetero1D {
                diffusivity: Diffusivity::benchmark(),
                epsilon: 1e-3,
                patch: PatchConfig {
                    teeth: tooth_grid(0.01, 0.04),
                    micro_dx: 5e-5,
                    micro_dt: 1e-6,
                    macro_dt: 1e-3,
                    burst_steps: 10,
                    heal_steps: 10,
                    theta: 0.5,
                    projective: ProjectiveMethod::Euler,
                    lift_anchor: LiftAnchor::Point,
                },
                mode: SimulationMode::PatchDynamics,
                reference_dx: 5e-3,
                initial: IcSpec1D::default(),
            }),
            train_trajectories: 8,
            test_trajectories: 2,
            horizon: 1.0,
            sample_interval: 1e-3,
            features: FeatureSpec::default_1d(),
            architectures: vec![Architecture::Mlp, Architecture::Stencil],
            train: TrainConfig::default(),
            include_boundary_rows: true,
            snapshot_stride: 1,
            rollout: RolloutConfig { dt: 1e-3, diffusivity_scale: 1.0 },
            rollout_trajectories: 2,
            fourier_modes: 6,
        }
    }

    /// Small and fast: two training trajectories, 50 epochs.
    pub fn smoke_1d() -> Self {
        let mut c = Self::default_1d();
        c.name = "hetero-1d-smoke".into();
        c.train_trajectories = 2;
        c.test_trajectories = 1;
        c.rollout_trajectories = 1;
        c.train.max_epochs = 50;
        c
    }

    /// `eps = 1e-5` with micro resolution `1e-7`.
    pub fn full_scale_1d() -> Self {
        let mut c = Self::default_1d();
        c.name = "hetero-1d-full-scale".into();
        if let Problem::Hetero1d(p) = &mut c.problem {
            p.epsilon = 1e-5;
            p.patch.teeth = tooth_grid(1e-4, 8e-3);
            p.patch.micro_dx = 1e-7;
        }
        c
    }

    /// Benchmark lattice, 16 x 16 patches, 85 training and 15 test
    /// trajectories.
    pub fn default_2d() -> Self {
        ExperimentConfig {
            name: "lattice-2d".into(),
            seed: 20190410,
            problem: Problem::Lattice2d(Lattice2D {
                sites: 480,
                patches: 16,
                core: 6,
                coupling: GhostCoupling::PeriodJump,
                stepper: PatchStepper::Exponential { dt: 5e-4 },
                heal_time: 0.0,
                initial: IcSpec2D::default(),
            }),
            train_trajectories: 85,
            test_trajectories: 15,
            horizon: 1.0,
            sample_interval: 0.01,
            features: FeatureSpec::default_2d(),
            architectures: vec![Architecture::Mlp, Architecture::Stencil],
            train: TrainConfig { max_epochs: 20, patience: 5, ..TrainConfig::default() },
            include_boundary_rows: true,
            snapshot_stride: 1,
            rollout: RolloutConfig { dt: 2e-3, diffusivity_scale: 1.4 },
            rollout_trajectories: 15,
            fourier_modes: 6,
        }
    }

    /// Few trajectories on a coarse lattice.
    pub fn smoke_2d() -> Self {
        let mut c = Self::default_2d();
        c.name = "lattice-2d-smoke".into();
        if let Problem::Lattice2d(p) = &mut c.problem {
            p.sites = 240;
            p.patches = 8;
        }
        c.train_trajectories = 3;
        c.test_trajectories = 1;
        c.rollout_trajectories = 1;
        c.horizon = 0.2;
        c.train.max_epochs = 5;
        c
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.problem, Problem::Lattice2d(_))
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_trajectories == 0 || self.test_trajectories == 0 {
            return config("trajectory counts must be positive");
        }
        if self.rollout_trajectories > self.test_trajectories {
            return config("cannot roll out more trajectories than are held out");
        }
        if self.architectures.is_empty() {
            return config("no architecture selected");
        }
        if self.snapshot_stride == 0 {
            return config("snapshot stride must be positive");
        }
        if !(self.horizon > 0.0 && self.sample_interval > 0.0) {
            return config("horizon and sampling interval must be positive");
        }
        let r = self.horizon / self.sample_interval;
        if (r - r.round()).abs() > 1e-9 * r.max(1.0) {
            return config("sampling interval must divide the horizon");
        }
        self.features.validate().map_err(|e| crate::Error::Config(e.to_string()))?;
        self.train.validate().map_err(|e| crate::Error::Config(e.to_string()))?;
        match &self.problem {
            Problem::Hetero1d(p) => {
                p.patch.validate(p.epsilon)?;
                if matches!(self.features.method, crate::features::DerivativeMethod::Spectral) {
                    return config("1D problems use finite-difference features");
                }
                let steps = self.sample_interval / p.patch.macro_dt;
                if p.mode == SimulationMode::PatchDynamics && (steps - steps.round()).abs() > 1e-9 {
                    return config("sampling interval must be a multiple of the macro step");
                }
                self.rollout.validate(&p.patch.teeth.macro_grid())
            }
            Problem::Lattice2d(p) => {
                let g = p.patch_grid()?;
                if !matches!(self.features.method, crate::features::DerivativeMethod::Spectral) {
                    return config("2D problems use spectral features");
                }
                self.rollout.validate(&g.macro_grid())
            }
        }
    }
}
