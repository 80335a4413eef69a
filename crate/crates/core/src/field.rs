//! Coarse (macro) grids and the fields that live on them.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{input, Result};

/// Geometry of a coarse grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MacroGrid {
    /// `n` cell-centred points on `[x_lo, x_hi]`: `x_lo + (i + 1/2) dx`.
    Line { x_lo: f64, x_hi: f64, n: usize },
    /// `n x n` points on `[0, 2 pi)^2` starting at `(origin, origin)`.
    Torus { n: usize, origin: f64 },
}

impl MacroGrid {
    pub fn spacing(&self) -> f64 {
        match *self {
            MacroGrid::Line { x_lo, x_hi, n } => (x_hi - x_lo) / n as f64,
            MacroGrid::Torus { n, .. } => 2.0 * PI / n as f64,
        }
    }

    pub fn side(&self) -> usize {
        match *self {
            MacroGrid::Line { n, .. } | MacroGrid::Torus { n, .. } => n,
        }
    }

    /// Number of values a field on this grid carries.
    pub fn len(&self) -> usize {
        match *self {
            MacroGrid::Line { n, .. } => n,
            MacroGrid::Torus { n, .. } => n * n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, MacroGrid::Torus { .. })
    }

    /// Coordinate of point `i` along an axis.
    pub fn coord(&self, i: usize) -> f64 {
        match *self {
            MacroGrid::Line { x_lo, .. } => x_lo + (i as f64 + 0.5) * self.spacing(),
            MacroGrid::Torus { origin, .. } => origin + i as f64 * self.spacing(),
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.side()).map(|i| self.coord(i)).collect()
    }

    /// Whether two grids share spacing and layout to relative `1e-9`.
    pub fn matches(&self, other: &MacroGrid) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
        match (*self, *other) {
            (MacroGrid::Line { x_lo: a0, x_hi: a1, n: na }, MacroGrid::Line { x_lo: b0, x_hi: b1, n: nb }) => {
                na == nb && close(a0, b0) && close(a1, b1)
            }
            (MacroGrid::Torus { n: na, .. }, MacroGrid::Torus { n: nb, .. }) => na == nb,
            _ => false,
        }
    }
}

/// Values on a macro grid at one time. 2D fields are row-major, `y` slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct MacroField {
    pub grid: MacroGrid,
    pub values: Vec<f64>,
    pub time: f64,
}

impl MacroField {
    pub fn new(grid: MacroGrid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return input(format!("grid holds {} points but {} values were given", grid.len(), values.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return input(format!("non-finite macro value at index {i}"));
        }
        Ok(MacroField { grid, values, time })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Fixed end values of a Dirichlet line problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndValues {
    pub left: f64,
    pub right: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_is_cell_centred() {
        let g = MacroGrid::Line { x_lo: 0.0, x_hi: 1.0, n: 10 };
        assert!((g.coord(0) - 0.05).abs() < 1e-15);
        assert!((g.coord(9) - 0.95).abs() < 1e-15);
        assert!((g.spacing() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn field_length_is_checked() {
        let g = MacroGrid::Torus { n: 4, origin: 0.0 };
        assert!(MacroField::new(g, vec![0.0; 15], 0.0).is_err());
        assert!(MacroField::new(g, vec![0.0; 16], 0.0).is_ok());
    }
}
