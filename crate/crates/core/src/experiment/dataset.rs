//! Snapshot datasets and their CSV/JSON files.
//!
//! A dataset is a CSV of `(trajectory, t, index, coordinate, U, dUdt)` rows
//! plus a JSON sidecar with the grid, the boundary values and initial
//! condition of every trajectory, and provenance.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::ic::{SineSeries1D, SineSeries2D};
use crate::equation_free::{Snapshot, SnapshotSeries};
use crate::error::{Error, Result};
use crate::field::{EndValues, MacroGrid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    Line(SineSeries1D),
    Torus(SineSeries2D),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub index: usize,
    pub ends: Option<EndValues>,
    pub initial: InitialCondition,
    pub snapshots: Vec<Snapshot>,
}

impl TrajectoryRecord {
    pub fn series(&self, grid: MacroGrid) -> SnapshotSeries {
        SnapshotSeries { grid, ends: self.ends, snapshots: self.snapshots.clone() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetProvenance {
    /// Simulation scheme that produced the records.
    pub scheme: String,
    pub config_sha256: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotDataset {
    pub grid: MacroGrid,
    pub provenance: DatasetProvenance,
    pub trajectories: Vec<TrajectoryRecord>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    columns: Vec<String>,
    grid: MacroGrid,
    provenance: DatasetProvenance,
    trajectories: Vec<SidecarEntry>,
}

#[derive(Serialize, Deserialize)]
struct SidecarEntry {
    index: usize,
    ends: Option<EndValues>,
    initial: InitialCondition,
}

/// Column names of a dataset CSV on `grid`.
pub fn columns(grid: &MacroGrid) -> &'static [&'static str] {
    if grid.is_periodic() {
        &["trajectory", "t", "i", "j", "x", "y", "U", "dUdt"]
    } else {
        &["trajectory", "t", "i", "x", "U", "dUdt"]
    }
}

/// Path of the JSON sidecar next to a dataset CSV.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

impl SnapshotDataset {
    pub fn rows(&self) -> usize {
        self.trajectories.iter().map(|t| t.snapshots.len()).sum::<usize>() * self.grid.len()
    }

    pub fn to_csv(&self) -> String {
        let mut out = columns(&self.grid).join(",");
        out.push('\n');
        let coords = self.grid.coords();
        let n = self.grid.side();
        for tr in &self.trajectories {
            for s in &tr.snapshots {
                for (k, (u, d)) in s.u.iter().zip(&s.dudt).enumerate() {
                    if self.grid.is_periodic() {
                        let (i, j) = (k % n, k / n);
                        let _ = writeln!(
                            out,
                            "{},{:.16e},{i},{j},{:.16e},{:.16e},{u:.16e},{d:.16e}",
                            tr.index, s.t, coords[i], coords[j]
                        );
                    } else {
                        let _ = writeln!(out, "{},{:.16e},{k},{:.16e},{u:.16e},{d:.16e}", tr.index, s.t, coords[k]);
                    }
                }
            }
        }
        out
    }

    pub fn sidecar_json(&self) -> Result<String> {
        let side = Sidecar {
            columns: columns(&self.grid).iter().map(|s| s.to_string()).collect(),
            grid: self.grid,
            provenance: self.provenance.clone(),
            trajectories: self
                .trajectories
                .iter()
                .map(|t| SidecarEntry { index: t.index, ends: t.ends, initial: t.initial.clone() })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&side)? + "\n")
    }

    /// Writes the CSV and its sidecar; returns both paths.
    pub fn write(&self, csv: &Path) -> Result<(PathBuf, PathBuf)> {
        if let Some(dir) = csv.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(csv, self.to_csv())?;
        let side = sidecar_path(csv);
        std::fs::write(&side, self.sidecar_json()?)?;
        Ok((csv.to_path_buf(), side))
    }

    pub fn read(csv: &Path) -> Result<Self> {
        let side = std::fs::read_to_string(sidecar_path(csv))?;
        let text = std::fs::read_to_string(csv)?;
        Self::parse(&text, &side)
    }

    /// Rebuilds a dataset from CSV text and sidecar JSON.
    pub fn parse(csv: &str, sidecar: &str) -> Result<Self> {
        let side: Sidecar = serde_json::from_str(sidecar)?;
        let grid = side.grid;
        let cols = columns(&grid);
        let mut lines = csv.lines().enumerate();
        let bad = |line: usize, message: String| Error::Parse { line: line + 1, message };
        match lines.next() {
            Some((_, h)) if h.trim() == cols.join(",") => {}
            Some((l, h)) => return Err(bad(l, format!("expected header `{}`, found `{h}`", cols.join(",")))),
            None => return Err(bad(0, "missing header".into())),
        }
        let mut trajectories: Vec<TrajectoryRecord> = side
            .trajectories
            .into_iter()
            .map(|e| TrajectoryRecord { index: e.index, ends: e.ends, initial: e.initial, snapshots: Vec::new() })
            .collect();
        let n = grid.side();
        let per = grid.len();
        // (trajectory slot, snapshot) currently being filled
        let mut open: Option<(usize, Snapshot)> = None;
        for (l, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols.len() {
                return Err(bad(l, format!("expected {} fields, found {}", cols.len(), fields.len())));
            }
            let int = |k: usize| fields[k].trim().parse::<usize>().map_err(|e| bad(l, format!("column {}: {e}", cols[k])));
            let num = |k: usize| fields[k].trim().parse::<f64>().map_err(|e| bad(l, format!("column {}: {e}", cols[k])));
            let traj = int(0)?;
            let slot = trajectories
                .iter()
                .position(|t| t.index == traj)
                .ok_or_else(|| bad(l, format!("trajectory {traj} is not listed in the sidecar")))?;
            let t = num(1)?;
            let k = if grid.is_periodic() { int(3)? * n + int(2)? } else { int(2)? };
            let (u, d) = if grid.is_periodic() { (num(6)?, num(7)?) } else { (num(4)?, num(5)?) };
            let (cur_slot, snap) = open.get_or_insert_with(|| (slot, Snapshot { t, u: Vec::with_capacity(per), dudt: Vec::with_capacity(per) }));
            if *cur_slot != slot || snap.t != t {
                return Err(bad(l, "snapshot ended early".into()));
            }
            if k != snap.u.len() {
                return Err(bad(l, format!("expected point {}, found {k}", snap.u.len())));
            }
            snap.u.push(u);
            snap.dudt.push(d);
            if snap.u.len() == per {
                let (s, snap) = open.take().expect("open snapshot");
                if let Some(prev) = trajectories[s].snapshots.last() {
                    if !(snap.t > prev.t) {
                        return Err(bad(l, "snapshot times must increase".into()));
                    }
                }
                trajectories[s].snapshots.push(snap);
            }
        }
        if open.is_some() {
            return Err(bad(csv.lines().count().saturating_sub(1), "file ends inside a snapshot".into()));
        }
        Ok(SnapshotDataset { grid, provenance: side.provenance, trajectories })
    }
}

/// Raw bytes of `data` hashed with SHA-256, as lowercase hex.
pub fn sha256_hex(data: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(data).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}
