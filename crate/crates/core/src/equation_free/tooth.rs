//! Tooth geometry, restriction, coupling polynomials and lifting in 1D.

use serde::{Deserialize, Serialize};

use crate::error::{config, input, Error, Result};
use crate::field::{EndValues, MacroField, MacroGrid};
use crate::linalg::solve_dense;
use crate::micro::MicroState1D;
use crate::stencil::fd_weights;

/// Teeth with buffers, uniformly spaced over `[x_lo, x_hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToothGrid1D {
    pub x_lo: f64,
    pub x_hi: f64,
    pub teeth: usize,
    /// `h`: width of the averaging core.
    pub tooth_width: f64,
    /// `H`: width of the simulated patch, core included.
    pub buffer_width: f64,
    /// Even degree `k` of the coupling polynomial.
    pub coupling_degree: usize,
    /// Degree `d` of the lifted Taylor profile.
    pub lift_degree: usize,
}

/// A polynomial stored by its derivatives at `center`:
/// `p(x) = sum_m derivs[m] (x - center)^m / m!`.
#[derive(Clone, Debug, PartialEq)]
pub struct TaylorPoly {
    pub center: f64,
    pub derivs: Vec<f64>,
}

impl TaylorPoly {
    pub fn eval(&self, x: f64) -> f64 {
        self.derivative(x, 0)
    }

    /// `order`-th derivative at `x`.
    pub fn derivative(&self, x: f64, order: usize) -> f64 {
        let s = x - self.center;
        let mut acc = 0.0;
        let mut term = 1.0;
        for (j, c) in self.derivs.iter().enumerate().skip(order) {
            acc += c * term;
            term *= s / (j + 1 - order) as f64;
        }
        acc
    }

    /// Mean over `[center + a, center + b]`.
    pub fn box_average(&self, a: f64, b: f64) -> f64 {
        let mut acc = 0.0;
        let mut fact = 1.0;
        for (m, c) in self.derivs.iter().enumerate() {
            if m > 0 {
                fact *= m as f64;
            }
            acc += c / fact * monomial_average(m, a, b);
        }
        acc
    }
}

/// Mean of `s^m` over `[a, b]`, or `a^m` when the interval is a point.
pub fn monomial_average(m: usize, a: f64, b: f64) -> f64 {
    if (b - a).abs() < 1e-300 {
        return a.powi(m as i32);
    }
    (b.powi(m as i32 + 1) - a.powi(m as i32 + 1)) / ((m as f64 + 1.0) * (b - a))
}

#[derive(Clone, Copy, Debug)]
struct Node {
    pos: f64,
    width: f64,
    value: f64,
}

impl ToothGrid1D {
    pub fn validate(&self) -> Result<()> {
        if self.teeth == 0 {
            return config("need at least one tooth");
        }
        if !(self.x_hi > self.x_lo) {
            return config("tooth domain has non-positive length");
        }
        let dx = self.spacing();
        if !(self.tooth_width > 0.0 && self.tooth_width <= self.buffer_width && self.buffer_width < dx) {
            return config(format!(
                "need 0 < h <= H < spacing, got h = {}, H = {}, spacing = {dx}",
                self.tooth_width, self.buffer_width
            ));
        }
        if self.coupling_degree < 2 || self.coupling_degree % 2 == 1 {
            return config(format!("coupling degree must be even and >= 2, got {}", self.coupling_degree));
        }
        if self.lift_degree < 2 || self.lift_degree < self.coupling_degree {
            return config(format!(
                "lift degree {} must be >= 2 and >= the coupling degree",
                self.lift_degree
            ));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.x_hi - self.x_lo) / self.teeth as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x_lo + (i as f64 + 0.5) * self.spacing()
    }

    pub fn macro_grid(&self) -> MacroGrid {
        MacroGrid::Line { x_lo: self.x_lo, x_hi: self.x_hi, n: self.teeth }
    }

    /// Fraction of the domain covered by patches.
    pub fn coverage(&self) -> f64 {
        self.teeth as f64 * self.buffer_width / (self.x_hi - self.x_lo)
    }

    // Teeth plus zero-width end points carrying the boundary data.
    fn nodes(&self, values: &[f64], ends: Option<EndValues>) -> (Vec<Node>, usize) {
        let mut nodes = Vec::with_capacity(self.teeth + 2);
        if let Some(e) = ends {
            nodes.push(Node { pos: self.x_lo, width: 0.0, value: e.left });
        }
        let offset = nodes.len();
        for (i, v) in values.iter().enumerate() {
            nodes.push(Node { pos: self.center(i), width: self.tooth_width, value: *v });
        }
        if let Some(e) = ends {
            nodes.push(Node { pos: self.x_hi, width: 0.0, value: e.right });
        }
        (nodes, offset)
    }

    fn check_field(&self, u: &MacroField) -> Result<()> {
        if !u.grid.matches(&self.macro_grid()) {
            return Err(Error::Geometry("macro field does not live on this tooth grid".into()));
        }
        Ok(())
    }

    /// Fine grid covering the patch of tooth `i` with spacing close to `dx`.
    pub fn patch_grid(&self, i: usize, dx: f64) -> Result<(f64, usize)> {
        let cells = (self.buffer_width / dx).round();
        if cells < 2.0 || (cells * dx - self.buffer_width).abs() > 1e-6 * dx {
            return Err(Error::Geometry(format!(
                "patch width {} is not a multiple of the micro spacing {dx}",
                self.buffer_width
            )));
        }
        Ok((self.center(i) - 0.5 * self.buffer_width, cells as usize + 1))
    }
}

fn window(len: usize, at: usize, size: usize) -> Option<usize> {
    if size > len {
        return None;
    }
    let half = size / 2;
    Some(at.saturating_sub(half).min(len - size))
}

/// Polynomial of degree `k` whose box averages over tooth `i` and `k/2`
/// neighbours on each side match the macro values. Near a Dirichlet end the
/// window shifts and the end point enters as a zero-width tooth.
pub fn coupling_polynomial(
    u: &MacroField,
    ends: Option<EndValues>,
    grid: &ToothGrid1D,
    i: usize,
    k: usize,
) -> Result<TaylorPoly> {
    grid.check_field(u)?;
    if k % 2 == 1 {
        return input(format!("coupling degree must be even, got {k}"));
    }
    let (nodes, offset) = grid.nodes(&u.values, ends);
    let Some(start) = window(nodes.len(), i + offset, k + 1) else {
        return config(format!("{} coupling points cannot fix a degree-{k} polynomial", nodes.len()));
    };
    let xc = grid.center(i);
    let scale = grid.spacing();
    let m = k + 1;
    let mut a = vec![0.0; m * m];
    let mut b = vec![0.0; m];
    for (r, node) in nodes[start..start + m].iter().enumerate() {
        let s = (node.pos - xc) / scale;
        let w = 0.5 * node.width / scale;
        for c in 0..m {
            a[r * m + c] = monomial_average(c, s - w, s + w);
        }
        b[r] = node.value;
    }
    let mono = solve_dense(&a, &b, m)?;
    let mut derivs = Vec::with_capacity(m);
    let mut fact = 1.0;
    for (c, v) in mono.iter().enumerate() {
        if c > 0 {
            fact *= c as f64;
        }
        derivs.push(v * fact / scale.powi(c as i32));
    }
    Ok(TaylorPoly { center: xc, derivs })
}

/// Slopes of `p` at the two edges of a tooth of width `h`.
pub fn tooth_edge_slopes(p: &TaylorPoly, h: f64) -> (f64, f64) {
    (p.derivative(p.center - 0.5 * h, 1), p.derivative(p.center + 0.5 * h, 1))
}

/// How the constant term of the lifted profile is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftAnchor {
    /// The profile passes through `U_i` at the tooth centre.
    Point,
    /// The profile's core average equals `U_i`, so restriction undoes lifting.
    BoxAverage,
}

/// Derivatives of the interpolant of degree `d` through the macro points
/// (and end values) nearest to tooth `i`.
pub fn lift_derivatives(u: &MacroField, ends: Option<EndValues>, grid: &ToothGrid1D, i: usize) -> Result<TaylorPoly> {
    grid.check_field(u)?;
    let d = grid.lift_degree;
    let (nodes, offset) = grid.nodes(&u.values, ends);
    let Some(start) = window(nodes.len(), i + offset, d + 1) else {
        return config(format!("{} points cannot support a degree-{d} lift", nodes.len()));
    };
    let sel = &nodes[start..start + d + 1];
    let xc = grid.center(i);
    let scale = grid.spacing();
    let pos: Vec<f64> = sel.iter().map(|n| (n.pos - xc) / scale).collect();
    let w = fd_weights(0.0, &pos, d);
    let derivs = (0..=d)
        .map(|m| w[m].iter().zip(sel).map(|(w, n)| w * n.value).sum::<f64>() / scale.powi(m as i32))
        .collect();
    Ok(TaylorPoly { center: xc, derivs })
}

/// Taylor profile for tooth `i`, sampled on its patch at spacing `dx`.
pub fn lift(
    u: &MacroField,
    ends: Option<EndValues>,
    grid: &ToothGrid1D,
    i: usize,
    dx: f64,
    anchor: LiftAnchor,
) -> Result<MicroState1D> {
    let p = lift_derivatives(u, ends, grid, i)?;
    let (x0, n) = grid.patch_grid(i, dx)?;
    let mut s = MicroState1D::sample(x0, dx, n, |x| p.eval(x));
    s.time = u.time;
    if anchor == LiftAnchor::BoxAverage {
        // shift by the discrete restriction defect, not the analytic one
        let shift = u.values[i] - restrict_tooth(&s, grid.center(i), grid.tooth_width)?;
        s.values.iter_mut().for_each(|v| *v += shift);
    }
    Ok(s)
}

/// Exact mean of the piecewise-linear interpolant of `state` over `[a, b]`.
pub fn average_over(state: &MicroState1D, a: f64, b: f64) -> Result<f64> {
    let tol = 1e-9 * state.dx;
    if a < state.x0 - tol || b > state.x_end() + tol || !(b > a) {
        return Err(Error::Geometry(format!(
            "interval [{a}, {b}] is not covered by the micro grid [{}, {}]",
            state.x0,
            state.x_end()
        )));
    }
    let a = a.max(state.x0);
    let b = b.min(state.x_end());
    let n = state.len();
    let u = &state.values;
    let at = |x: f64| {
        let s = ((x - state.x0) / state.dx).clamp(0.0, (n - 1) as f64);
        let k = (s.floor() as usize).min(n - 2);
        let w = s - k as f64;
        (1.0 - w) * u[k] + w * u[k + 1]
    };
    let first = (((a - state.x0) / state.dx).floor() as usize).min(n - 2);
    let mut acc = 0.0;
    let mut k = first;
    let mut lo = a;
    while lo < b && k < n - 1 {
        let hi = state.x(k + 1).min(b);
        if hi > lo {
            acc += 0.5 * (hi - lo) * (at(lo) + at(hi));
        }
        lo = hi;
        k += 1;
    }
    Ok(acc / (b - a))
}

/// Core average of one tooth.
pub fn restrict_tooth(state: &MicroState1D, center: f64, h: f64) -> Result<f64> {
    average_over(state, center - 0.5 * h, center + 0.5 * h)
}

/// Tooth averages of every patch; buffers are excluded.
pub fn restrict(states: &[MicroState1D], grid: &ToothGrid1D) -> Result<MacroField> {
    if states.len() != grid.teeth {
        return Err(Error::Geometry(format!("{} micro states for {} teeth", states.len(), grid.teeth)));
    }
    let values = states
        .iter()
        .enumerate()
        .map(|(i, s)| restrict_tooth(s, grid.center(i), grid.tooth_width))
        .collect::<Result<Vec<_>>>()?;
    MacroField::new(grid.macro_grid(), values, states.first().map_or(0.0, |s| s.time))
}
