//! Spatial-derivative features of macro fields.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::field::{EndValues, MacroField, MacroGrid};
use crate::spectral::{wavenumber, Spectral2D};
use crate::stencil::fd_weights;

/// One feature column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Descriptor {
    Value,
    Dx,
    Dxx,
    Dy,
    Dyy,
    Dxy,
}

impl Descriptor {
    /// Derivative orders along `(x, y)`.
    pub fn orders(self) -> (u32, u32) {
        match self {
            Descriptor::Value => (0, 0),
            Descriptor::Dx => (1, 0),
            Descriptor::Dxx => (2, 0),
            Descriptor::Dy => (0, 1),
            Descriptor::Dyy => (0, 2),
            Descriptor::Dxy => (1, 1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DerivativeMethod {
    FiniteDifference { stencil: usize },
    Spectral,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub descriptors: Vec<Descriptor>,
    pub method: DerivativeMethod,
}

impl FeatureSpec {
    /// `(U, U_x, U_xx)` with three-point differences.
    pub fn default_1d() -> Self {
        FeatureSpec {
            descriptors: vec![Descriptor::Value, Descriptor::Dx, Descriptor::Dxx],
            method: DerivativeMethod::FiniteDifference { stencil: 3 },
        }
    }

    /// `(U, U_x, U_y, U_xx, U_yy, U_xy)` by FFT.
    pub fn default_2d() -> Self {
        use Descriptor::*;
        FeatureSpec { descriptors: vec![Value, Dx, Dy, Dxx, Dyy, Dxy], method: DerivativeMethod::Spectral }
    }

    pub fn validate(&self) -> Result<()> {
        if self.descriptors.is_empty() {
            return input("feature list is empty");
        }
        for (k, d) in self.descriptors.iter().enumerate() {
            if self.descriptors[..k].contains(d) {
                return input(format!("duplicate feature {d:?}"));
            }
        }
        if let DerivativeMethod::FiniteDifference { stencil } = self.method {
            if stencil < 3 || stencil % 2 == 0 {
                return input(format!("stencil size must be odd and at least 3, got {stencil}"));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.descriptors.len()
    }
}

/// Row-major `rows x cols` matrix, one row per grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.data[r * self.cols + c]).collect()
    }
}

/// Features of any macro field: finite differences on lines, FFT on tori.
pub fn compute_features(field: &MacroField, spec: &FeatureSpec, ends: Option<EndValues>) -> Result<FeatureMatrix> {
    match (field.grid, spec.method) {
        (MacroGrid::Line { .. }, DerivativeMethod::FiniteDifference { .. }) => fd_derivatives_1d(field, spec, ends),
        (MacroGrid::Torus { .. }, DerivativeMethod::Spectral) => spectral_derivatives_2d(field, spec),
        _ => input("derivative method does not fit the grid"),
    }
}

/// Ghost values beyond each end of a line. The ghost at virtual position
/// `x_lo - (m - 1/2) dx` is read off the polynomial through the end value and
/// the `2 * width` nearest points.
pub fn ghost_values(values: &[f64], ends: EndValues, width: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = values.len();
    let need = 2 * width;
    if n < need {
        return input(format!("need at least {need} points for boundary padding, got {n}"));
    }
    // local coordinates in units of the spacing, boundary at 0
    let mut nodes = vec![0.0];
    nodes.extend((0..need).map(|i| i as f64 + 0.5));
    let side = |data: Vec<f64>| -> Vec<f64> {
        (1..=width)
            .map(|m| {
                let w = fd_weights(-(m as f64 - 0.5), &nodes, 0);
                w[0].iter().zip(&data).map(|(w, v)| w * v).sum()
            })
            .collect()
    };
    let mut left = vec![ends.left];
    left.extend_from_slice(&values[..need]);
    let mut right = vec![ends.right];
    right.extend(values[n - need..].iter().rev());
    Ok((side(left), side(right)))
}

/// Pads a line with `width` ghosts on each side, reading left to right.
pub fn pad_line(values: &[f64], ends: EndValues, width: usize) -> Result<Vec<f64>> {
    let (l, r) = ghost_values(values, ends, width)?;
    let mut out: Vec<f64> = l.iter().rev().copied().collect();
    out.extend_from_slice(values);
    out.extend(r);
    Ok(out)
}

/// Finite-difference features on a line. With end values the line is padded
/// with polynomial ghosts and every point gets a centred stencil; without
/// them the points near the ends use one-sided stencils of the same order.
pub fn fd_derivatives_1d(field: &MacroField, spec: &FeatureSpec, ends: Option<EndValues>) -> Result<FeatureMatrix> {
    spec.validate()?;
    let stencil = match spec.method {
        DerivativeMethod::FiniteDifference { stencil } => stencil,
        DerivativeMethod::Spectral => return input("spectral features need a periodic 2D grid"),
    };
    let MacroGrid::Line { n, .. } = field.grid else {
        return input("finite-difference features need a line grid");
    };
    if n < stencil {
        return input(format!("{n} points cannot hold a stencil of {stencil}"));
    }
    let mut orders = Vec::with_capacity(spec.width());
    for d in &spec.descriptors {
        let (ox, oy) = d.orders();
        if oy > 0 {
            return input(format!("feature {d:?} needs a 2D grid"));
        }
        orders.push(ox as usize);
    }
    let dx = field.grid.spacing();
    let half = stencil / 2;
    let centred = fd_weights(0.0, &(0..stencil).map(|k| k as f64 - half as f64).collect::<Vec<_>>(), 2);
    let cols = spec.width();
    let mut data = vec![0.0; n * cols];
    let padded = match ends {
        Some(e) => Some(pad_line(&field.values, e, half)?),
        None => None,
    };
    for i in 0..n {
        let (window, weights) = match &padded {
            Some(p) => (&p[i..i + stencil], centred.clone()),
            None if i >= half && i + half < n => (&field.values[i - half..=i + half], centred.clone()),
            None => {
                let len = (stencil + 1).min(n);
                let start = if i < half { 0 } else { n - len };
                let nodes: Vec<f64> = (start..start + len).map(|k| k as f64 - i as f64).collect();
                (&field.values[start..start + len], fd_weights(0.0, &nodes, 2))
            }
        };
        for (c, &m) in orders.iter().enumerate() {
            let s: f64 = weights[m].iter().zip(window).map(|(w, v)| w * v).sum();
            data[i * cols + c] = s / dx.powi(m as i32);
        }
    }
    Ok(FeatureMatrix { rows: n, cols, data })
}

/// Spectral derivative `d^p/dx^p d^q/dy^q` of a periodic `n x n` field.
/// Odd-order derivatives drop the Nyquist bin of that axis.
pub fn spectral_derivative(fft: &Spectral2D, coeffs: &[Complex64], p: u32, q: u32) -> Result<Vec<f64>> {
    let (nx, ny) = (fft.nx, fft.ny);
    let mut c = coeffs.to_vec();
    for ky in 0..ny {
        let wy = wavenumber(ky, ny);
        let zero_y = q % 2 == 1 && ny % 2 == 0 && ky == ny / 2;
        for kx in 0..nx {
            let wx = wavenumber(kx, nx);
            let zero_x = p % 2 == 1 && nx % 2 == 0 && kx == nx / 2;
            let z = &mut c[ky * nx + kx];
            if zero_x || zero_y {
                *z = Complex64::new(0.0, 0.0);
            } else {
                *z *= Complex64::new(0.0, wx as f64).powu(p) * Complex64::new(0.0, wy as f64).powu(q);
            }
        }
    }
    let (re, residue) = fft.inverse(c)?;
    if residue > 1e-10 {
        return Err(Error::Numerical(format!("spectral derivative left imaginary residue {residue:e}")));
    }
    Ok(re)
}

/// FFT features on the periodic square.
pub fn spectral_derivatives_2d(field: &MacroField, spec: &FeatureSpec) -> Result<FeatureMatrix> {
    spec.validate()?;
    let MacroGrid::Torus { n, .. } = field.grid else {
        return input("spectral features need a periodic 2D grid");
    };
    if field.values.len() != n * n {
        return input(format!("field has {} values, grid needs {}", field.values.len(), n * n));
    }
    let fft = Spectral2D::new(n, n);
    let coeffs = fft.forward(&field.values)?;
    let cols = spec.width();
    let mut data = vec![0.0; n * n * cols];
    for (c, d) in spec.descriptors.iter().enumerate() {
        let (p, q) = d.orders();
        let col = if (p, q) == (0, 0) { field.values.clone() } else { spectral_derivative(&fft, &coeffs, p, q)? };
        for (r, v) in col.into_iter().enumerate() {
            data[r * cols + c] = v;
        }
    }
    Ok(FeatureMatrix { rows: n * n, cols, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn line(n: usize, f: impl Fn(f64) -> f64) -> MacroField {
        let grid = MacroGrid::Line { x_lo: 0.0, x_hi: 1.0, n };
        let values = grid.coords().into_iter().map(f).collect();
        MacroField::new(grid, values, 0.0).unwrap()
    }

    fn torus(n: usize, f: impl Fn(f64, f64) -> f64) -> MacroField {
        let grid = MacroGrid::Torus { n, origin: 0.1 };
        let c = grid.coords();
        let values = (0..n * n).map(|k| f(c[k % n], c[k / n])).collect();
        MacroField::new(grid, values, 0.0).unwrap()
    }

    #[test]
    fn constant_line_features() {
        let f = line(10, |_| 2.0);
        let m = fd_derivatives_1d(&f, &FeatureSpec::default_1d(), None).unwrap();
        for r in 0..10 {
            assert_eq!(m.row(r)[0], 2.0);
            assert!(m.row(r)[1].abs() < 1e-12 && m.row(r)[2].abs() < 1e-10);
        }
    }

    #[test]
    fn quadratics_are_exact_everywhere() {
        let q = |x: f64| 1.0 - 2.0 * x + 3.0 * x * x;
        let f = line(10, q);
        let ends = EndValues { left: q(0.0), right: q(1.0) };
        for e in [None, Some(ends)] {
            let m = fd_derivatives_1d(&f, &FeatureSpec::default_1d(), e).unwrap();
            let x = f.grid.coords();
            for r in 0..10 {
                assert!((m.row(r)[1] - (-2.0 + 6.0 * x[r])).abs() < 1e-10);
                assert!((m.row(r)[2] - 6.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn centred_difference_of_sine() {
        let f = line(10, |x| (2.0 * PI * x).sin());
        let m = fd_derivatives_1d(&f, &FeatureSpec::default_1d(), None).unwrap();
        let dx = 0.1;
        let factor = -(2.0 / (dx * dx)) * (1.0 - (2.0 * PI * dx).cos());
        for r in 1..9 {
            assert!((m.row(r)[2] - factor * f.values[r]).abs() < 1e-10);
        }
    }

    #[test]
    fn five_point_stencil_and_bad_sizes() {
        let spec = FeatureSpec {
            descriptors: vec![Descriptor::Dxx],
            method: DerivativeMethod::FiniteDifference { stencil: 5 },
        };
        let quartic = |x: f64| x.powi(4);
        let f = line(12, quartic);
        let m = fd_derivatives_1d(&f, &spec, Some(EndValues { left: 0.0, right: 1.0 })).unwrap();
        for (r, x) in f.grid.coords().iter().enumerate() {
            assert!((m.row(r)[0] - 12.0 * x * x).abs() < 1e-8);
        }
        let bad = FeatureSpec { method: DerivativeMethod::FiniteDifference { stencil: 4 }, ..spec.clone() };
        assert!(fd_derivatives_1d(&f, &bad, None).is_err());
        assert!(fd_derivatives_1d(&line(4, |x| x), &spec, None).is_err());
    }

    #[test]
    fn spectral_exactness() {
        let f = torus(16, |x, _| (3.0 * x).sin());
        let spec = FeatureSpec { descriptors: vec![Descriptor::Dxx, Descriptor::Dy], ..FeatureSpec::default_2d() };
        let m = spectral_derivatives_2d(&f, &spec).unwrap();
        for r in 0..256 {
            assert!((m.row(r)[0] + 9.0 * f.values[r]).abs() < 1e-12);
            assert!(m.row(r)[1].abs() < 1e-12);
        }
        let g = torus(16, |x, y| (2.0 * x).sin() * y.cos());
        let spec = FeatureSpec { descriptors: vec![Descriptor::Dxy], ..FeatureSpec::default_2d() };
        let m = spectral_derivatives_2d(&g, &spec).unwrap();
        let c = g.grid.coords();
        for r in 0..256 {
            let (x, y) = (c[r % 16], c[r / 16]);
            assert!((m.row(r)[0] - 2.0 * (2.0 * x).cos() * -(y.sin())).abs() < 1e-12);
        }
        let k = torus(8, |_, _| 4.0);
        let m = spectral_derivatives_2d(&k, &FeatureSpec::default_2d()).unwrap();
        for r in 0..64 {
            assert!(m.row(r)[1..].iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn duplicate_descriptors_are_rejected() {
        let spec = FeatureSpec { descriptors: vec![Descriptor::Dx, Descriptor::Dx], ..FeatureSpec::default_1d() };
        assert!(spec.validate().is_err());
    }
}
