//! Random sine-series initial conditions.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcSpec1D {
    pub terms: usize,
    /// Amplitudes are drawn from `[-amplitude, amplitude]`.
    pub amplitude: f64,
    /// Wavenumbers are drawn from `[0, max_wavenumber]`.
    pub max_wavenumber: f64,
}

impl Default for IcSpec1D {
    fn default() -> Self {
        IcSpec1D { terms: 20, amplitude: 1.0, max_wavenumber: 4.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcSpec2D {
    pub terms: usize,
    pub amplitude: f64,
    /// Integer wavenumbers are drawn from `1..=max_wavenumber` per axis.
    pub max_wavenumber: u32,
}

impl Default for IcSpec2D {
    fn default() -> Self {
        IcSpec2D { terms: 10, amplitude: 1.0, max_wavenumber: 5 }
    }
}

/// One term `a sin(2 pi l x + phi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SineTerm {
    pub a: f64,
    pub l: f64,
    pub phi: f64,
}

/// `u0(x) = sum_j a_j sin(2 pi l_j x + phi_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SineSeries1D {
    pub terms: Vec<SineTerm>,
}

impl SineSeries1D {
    pub fn eval(&self, x: f64) -> f64 {
        self.terms.iter().map(|t| t.a * (TAU * t.l * x + t.phi).sin()).sum()
    }
}

/// One term `a sin(l_x x + phi_x) sin(l_y y + phi_y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductTerm {
    pub a: f64,
    pub lx: u32,
    pub ly: u32,
    pub phi_x: f64,
    pub phi_y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SineSeries2D {
    pub terms: Vec<ProductTerm>,
}

impl SineSeries2D {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.a * (t.lx as f64 * x + t.phi_x).sin() * (t.ly as f64 * y + t.phi_y).sin())
            .sum()
    }
}

pub fn random_ic_1d(spec: &IcSpec1D, rng: &mut impl Rng) -> SineSeries1D {
    let terms = (0..spec.terms)
        .map(|_| SineTerm {
            a: rng.random_range(-spec.amplitude..=spec.amplitude),
            l: rng.random_range(0.0..=spec.max_wavenumber),
            phi: rng.random_range(0.0..TAU),
        })
        .collect();
    SineSeries1D { terms }
}

pub fn random_ic_2d(spec: &IcSpec2D, rng: &mut impl Rng) -> SineSeries2D {
    let terms = (0..spec.terms)
        .map(|_| ProductTerm {
            a: rng.random_range(-spec.amplitude..=spec.amplitude),
            lx: rng.random_range(1..=spec.max_wavenumber),
            ly: rng.random_range(1..=spec.max_wavenumber),
            phi_x: rng.random_range(0.0..TAU),
            phi_y: rng.random_range(0.0..TAU),
        })
        .collect();
    SineSeries2D { terms }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::rng::{stream, Purpose};
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn draws_are_deterministic_and_bounded() {
        let spec = IcSpec1D::default();
        let a = random_ic_1d(&spec, &mut stream(1, Purpose::InitialCondition, 0));
        let b = random_ic_1d(&spec, &mut stream(1, Purpose::InitialCondition, 0));
        assert_eq!(a, b);
        assert_eq!(a.terms.len(), 20);
        for t in &a.terms {
            assert!(t.a.abs() <= 1.0 && (0.0..=4.0).contains(&t.l) && (0.0..TAU).contains(&t.phi));
        }
        let bound: f64 = a.terms.iter().map(|t| t.a.abs()).sum();
        assert!((0..100).all(|k| a.eval(k as f64 / 99.0).abs() <= bound));
    }

    #[test]
    fn hand_evaluations() {
        let s = SineSeries1D { terms: vec![SineTerm { a: 1.0, l: 1.0, phi: 0.0 }] };
        assert!((s.eval(0.25) - 1.0).abs() < 1e-15);
        let s = SineSeries2D { terms: vec![ProductTerm { a: 1.0, lx: 1, ly: 1, phi_x: 0.0, phi_y: 0.0 }] };
        assert!((s.eval(FRAC_PI_2, FRAC_PI_2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn wavenumbers_are_small_integers() {
        let mut rng = stream(3, Purpose::InitialCondition, 9);
        for _ in 0..20 {
            let s = random_ic_2d(&IcSpec2D::default(), &mut rng);
            assert!(s.terms.iter().all(|t| (1..=5).contains(&t.lx) && (1..=5).contains(&t.ly)));
        }
    }
}
