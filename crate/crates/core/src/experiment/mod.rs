//! End-to-end experiments: configuration, data generation, training,
//! evaluation and artifacts.

pub mod config;
pub mod dataset;
pub mod ic;
pub mod manifest;
pub mod rng;
pub mod run;

pub use config::{ExperimentConfig, Hetero1D, Lattice2D, Problem, SimulationMode};
pub use dataset::{DatasetProvenance, InitialCondition, SnapshotDataset, TrajectoryRecord};
pub use ic::{random_ic_1d, random_ic_2d, IcSpec1D, IcSpec2D, SineSeries1D, SineSeries2D};
pub use manifest::{Manifest, ManifestEntry, StageRecord, StageStatus};
pub use run::{
    evaluate_rhs, evaluate_rollouts, generate_dataset, homogenized_rate, learned_trajectory, model_spec, oracle,
    reference_trajectory, run_experiment, run_stage, run_stages, simulate_trajectory, train_model, training_set, truth,
    Layout, OracleReport, RhsMetrics, RolloutMetrics, Split, Truth, STAGES,
};
