//! Right-hand-side models: a network plus how its inputs are built from a
//! macro field.

use serde::{Deserialize, Serialize};

use super::dense::{Dense3, Layer};
use crate::error::{config, input, Error, Result};
use crate::features::{compute_features, pad_line, FeatureSpec};
use crate::field::{EndValues, MacroField, MacroGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// Pointwise network on spatial-derivative features.
    Mlp,
    /// Convolution over neighbouring values (3 in 1D, 3x3 in 2D) followed by
    /// two size-one convolutions.
    Stencil,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::Mlp => "mlp",
            Architecture::Stencil => "stencil",
        }
    }
}

/// How the stencil net fills values beyond the ends of a line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    /// Wrap around (tori).
    Periodic,
    /// Polynomial ghosts through the fixed end values.
    EndValue,
    /// Repeat the outermost value.
    Replicate,
}

/// Affine standardization `(x - mean) / std` per column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(width: usize) -> Self {
        Standardizer { mean: vec![0.0; width], std: vec![1.0; width] }
    }

    /// Column statistics of row-major `data`; a zero spread maps to 1.
    pub fn fit(data: &[f64], width: usize) -> Self {
        let rows = (data.len() / width).max(1) as f64;
        let mut mean = vec![0.0; width];
        for row in data.chunks(width) {
            mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= rows);
        let mut var = vec![0.0; width];
        for row in data.chunks(width) {
            for c in 0..width {
                var[c] += (row[c] - mean[c]).powi(2);
            }
        }
        let std = var.iter().map(|v| (v / rows).sqrt()).map(|s| if s > 0.0 && s.is_finite() { s } else { 1.0 }).collect();
        Standardizer { mean, std }
    }

    /// One shared mean and spread for every column.
    pub fn fit_scalar(data: &[f64], width: usize) -> Self {
        let s = Self::fit(data, 1);
        Standardizer { mean: vec![s.mean[0]; width], std: vec![s.std[0]; width] }
    }

    pub fn apply(&self, data: &mut [f64]) {
        let w = self.mean.len();
        for row in data.chunks_mut(w) {
            for c in 0..w {
                row[c] = (row[c] - self.mean[c]) / self.std[c];
            }
        }
    }

    pub fn invert(&self, data: &mut [f64]) {
        let w = self.mean.len();
        for row in data.chunks_mut(w) {
            for c in 0..w {
                row[c] = row[c] * self.std[c] + self.mean[c];
            }
        }
    }
}

/// Where a model came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset_sha256: String,
    pub seed: u64,
    pub train_config: serde_json::Value,
}

/// A trained right-hand-side model `dU/dt = G(U)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RhsModel {
    pub architecture: Architecture,
    pub net: Dense3,
    pub input_norm: Standardizer,
    pub target_norm: Standardizer,
    /// Feature columns for the MLP; unused by the stencil net.
    pub features: Option<FeatureSpec>,
    pub padding: Padding,
    /// Grid the model was trained on.
    pub grid: MacroGrid,
    pub provenance: Provenance,
}

/// Input width of an architecture on a grid.
pub fn input_width(arch: Architecture, grid: &MacroGrid, features: Option<&FeatureSpec>) -> Result<usize> {
    match arch {
        Architecture::Mlp => features.map(FeatureSpec::width).ok_or_else(|| Error::Input("MLP needs a feature spec".into())),
        Architecture::Stencil => Ok(if grid.is_periodic() { 9 } else { 3 }),
    }
}

/// Row-major network inputs for every grid point of `field`.
pub fn model_inputs(
    arch: Architecture,
    features: Option<&FeatureSpec>,
    padding: Padding,
    field: &MacroField,
    ends: Option<EndValues>,
) -> Result<Vec<f64>> {
    match arch {
        Architecture::Mlp => {
            let spec = features.ok_or_else(|| Error::Input("MLP needs a feature spec".into()))?;
            Ok(compute_features(field, spec, ends)?.data)
        }
        Architecture::Stencil => stencil_windows(field, padding, ends),
    }
}

/// Sliding windows of the stencil net's first convolution: `(U_{i-1}, U_i,
/// U_{i+1})` on lines, the 3x3 neighbourhood (row `dy`, column `dx`) on tori.
pub fn stencil_windows(field: &MacroField, padding: Padding, ends: Option<EndValues>) -> Result<Vec<f64>> {
    let u = &field.values;
    match field.grid {
        MacroGrid::Line { n, .. } => {
            if n < 3 {
                return input(format!("stencil needs at least 3 points, got {n}"));
            }
            let padded = match padding {
                Padding::EndValue => {
                    let e = ends.ok_or_else(|| Error::Input("end-value padding needs end values".into()))?;
                    pad_line(u, e, 1)?
                }
                Padding::Replicate => {
                    let mut p = vec![u[0]];
                    p.extend_from_slice(u);
                    p.push(u[n - 1]);
                    p
                }
                Padding::Periodic => {
                    let mut p = vec![u[n - 1]];
                    p.extend_from_slice(u);
                    p.push(u[0]);
                    p
                }
            };
            Ok(padded.windows(3).flatten().copied().collect())
        }
        MacroGrid::Torus { n, .. } => {
            if padding != Padding::Periodic {
                return config("periodic grids need periodic padding");
            }
            let mut out = Vec::with_capacity(9 * n * n);
            for j in 0..n {
                for i in 0..n {
                    for dy in 0..3 {
                        let jj = (j + n + dy - 1) % n;
                        for dx in 0..3 {
                            out.push(u[jj * n + (i + n + dx - 1) % n]);
                        }
                    }
                }
            }
            Ok(out)
        }
    }
}

impl RhsModel {
    /// Predicted `dU/dt` at every point of `field`. The stencil net refuses
    /// grids other than its training grid.
    pub fn predict(&self, field: &MacroField, ends: Option<EndValues>) -> Result<Vec<f64>> {
        if self.architecture == Architecture::Stencil && !self.grid.matches(&field.grid) {
            return config("stencil model was trained on a different grid; retrain it for this one");
        }
        let x = model_inputs(self.architecture, self.features.as_ref(), self.padding, field, ends)?;
        self.predict_inputs(x)
    }

    /// Prediction from raw (unstandardized) input rows.
    pub fn predict_inputs(&self, mut x: Vec<f64>) -> Result<Vec<f64>> {
        if self.input_norm.mean.len() != self.net.inputs() {
            return input("normalization width does not match the network");
        }
        self.input_norm.apply(&mut x);
        let mut y = self.net.forward_rows(&x)?;
        self.target_norm.invert(&mut y);
        Ok(y)
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            architecture: self.architecture,
            sizes: self.net.sizes,
            layers: self.net.layers(),
            input_norm: self.input_norm.clone(),
            target_norm: self.target_norm.clone(),
            features: self.features.clone(),
            padding: self.padding,
            grid: self.grid,
            grid_spacing: self.grid.spacing(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn from_file(f: ModelFile) -> Result<Self> {
        let net = Dense3::from_layers(&f.layers)?;
        if net.sizes != f.sizes {
            return input("layer shapes disagree with the declared sizes");
        }
        if f.input_norm.mean.len() != net.inputs() || f.input_norm.std.len() != net.inputs() {
            return input("input normalization width does not match the network");
        }
        if f.target_norm.mean.len() != 1 || f.target_norm.std.len() != 1 {
            return input("target normalization must be scalar");
        }
        if f.input_norm.std.iter().chain(&f.target_norm.std).any(|s| !(*s > 0.0)) {
            return input("normalization spreads must be positive");
        }
        Ok(RhsModel {
            architecture: f.architecture,
            net,
            input_norm: f.input_norm,
            target_norm: f.target_norm,
            features: f.features,
            padding: f.padding,
            grid: f.grid,
            provenance: f.provenance,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text)?)
    }
}

/// On-disk model layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub architecture: Architecture,
    pub sizes: [usize; 4],
    pub layers: Vec<Layer>,
    pub input_norm: Standardizer,
    pub target_norm: Standardizer,
    pub features: Option<FeatureSpec>,
    pub padding: Padding,
    pub grid: MacroGrid,
    pub grid_spacing: f64,
    pub provenance: Provenance,
}
