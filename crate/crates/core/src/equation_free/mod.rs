//! Gap-tooth and patch-dynamics schemes.

pub mod patch1d;
pub mod patch2d;
pub mod tooth;

pub use patch1d::{
    projective_step, simulate_gap_tooth_1d, simulate_patch_dynamics_1d, GapTooth1D, PatchConfig, PatchDynamics1D,
    ProjectiveMethod, ToothEdge,
};
pub use patch2d::{patch_edge_values_2d, simulate_gap_tooth_2d, GhostCoupling, PatchGrid2D, PatchStepper};
pub use tooth::{coupling_polynomial, lift, restrict, tooth_edge_slopes, LiftAnchor, TaylorPoly, ToothGrid1D};

use crate::field::{EndValues, MacroGrid};

/// Macro blow-up guard on `max |U|`.
pub const BLOW_UP: f64 = 1e6;

/// One recorded macro state with its time derivative.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
    pub dudt: Vec<f64>,
}

/// A time-ordered run on one macro grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSeries {
    pub grid: MacroGrid,
    pub ends: Option<EndValues>,
    pub snapshots: Vec<Snapshot>,
}
