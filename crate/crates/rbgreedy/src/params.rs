//! Parameter domain, sampling measures, and the checkerboard diffusion model.
//!
//! The parameter domain is `Y = [-1,1]^d`. The diffusion coefficient is the
//! affine family `a(y) = abar + sum_j y_j psi_j` with `psi_j = a_j chi_{D_j}`,
//! where `D_1..D_d` partition the unit square into a `k x k` grid of equal
//! cells and `a_j = j^{-t}`.

use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// A point `y` in `Y = [-1,1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    values: Vec<f64>,
}

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("parameter vector must have d >= 1"));
        }
        for (j, v) in values.iter().enumerate() {
            if !(-1.0..=1.0).contains(v) {
                return Err(Error::invalid(format!(
                    "component y_{} = {v} outside [-1,1]",
                    j + 1
                )));
            }
        }
        Ok(ParameterVector { values })
    }

    /// The origin of `Y`.
    pub fn zero(d: usize) -> Self {
        ParameterVector { values: vec![0.0; d] }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl std::ops::Index<usize> for ParameterVector {
    type Output = f64;
    fn index(&self, j: usize) -> &f64 {
        &self.values[j]
    }
}

/// Product probability measure on `Y` used for training draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMeasure {
    /// Product of uniform measures on `[-1,1]`.
    Uniform,
    /// Product arcsine (Chebyshev) measure, sampled as `y = cos(pi U)`.
    Chebyshev,
}

impl SamplingMeasure {
    /// One scalar draw.
    pub fn sample_value<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            SamplingMeasure::Uniform => 2.0 * rng.random::<f64>() - 1.0,
            SamplingMeasure::Chebyshev => (std::f64::consts::PI * rng.random::<f64>()).cos(),
        }
    }

    /// One point of `Y` with independent coordinates.
    pub fn sample<R: Rng + ?Sized>(&self, d: usize, rng: &mut R) -> ParameterVector {
        debug_assert!(d >= 1);
        ParameterVector { values: (0..d).map(|_| self.sample_value(rng)).collect() }
    }

    /// `n` independent points; deterministic given the stream state.
    pub fn sample_set<R: Rng + ?Sized>(
        &self,
        d: usize,
        n: usize,
        rng: &mut R,
    ) -> Vec<ParameterVector> {
        (0..n).map(|_| self.sample(d, rng)).collect()
    }

    /// Exact scalar CDF, for distribution tests.
    pub fn cdf(&self, t: f64) -> f64 {
        let t = t.clamp(-1.0, 1.0);
        match self {
            SamplingMeasure::Uniform => (t + 1.0) / 2.0,
            SamplingMeasure::Chebyshev => 1.0 - t.acos() / std::f64::consts::PI,
        }
    }
}

impl std::fmt::Display for SamplingMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SamplingMeasure::Uniform => write!(f, "uniform"),
            SamplingMeasure::Chebyshev => write!(f, "chebyshev"),
        }
    }
}

impl std::str::FromStr for SamplingMeasure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(SamplingMeasure::Uniform),
            "chebyshev" => Ok(SamplingMeasure::Chebyshev),
            other => Err(Error::invalid(format!("unknown measure '{other}'"))),
        }
    }
}

/// The affine diffusion coefficient `a(y) = abar + sum_j y_j a_j chi_{D_j}`
/// on the `k x k` checkerboard partition of the unit square.
///
/// Subdomains are enumerated row-major: `D_1` is the bottom-left cell, the
/// index increases left-to-right along each row of cells, rows stack upward.
/// Points on cell boundaries belong to the cell with the smaller index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineCoefficientModel {
    abar: f64,
    grid_k: usize,
    amplitudes: Vec<f64>,
    decay_t: f64,
    delta: f64,
}

/// Default §-style checkerboard model with `d = k^2`, `abar = 1 + delta` and
/// `a_j = j^{-t}`.
pub fn build_checkerboard_model(k: usize, t: f64, delta: f64) -> Result<AffineCoefficientModel> {
    if k < 1 {
        return Err(Error::invalid("k must be >= 1"));
    }
    if !(t > 0.0) {
        return Err(Error::invalid("decay exponent t must be > 0"));
    }
    if !(delta > 0.0) {
        return Err(Error::invalid("delta must be > 0"));
    }
    let d = k * k;
    let amplitudes = (1..=d).map(|j| (j as f64).powf(-t)).collect();
    Ok(AffineCoefficientModel { abar: 1.0 + delta, grid_k: k, amplitudes, decay_t: t, delta })
}

impl AffineCoefficientModel {
    /// Model with caller-supplied amplitudes (partition-of-unity tests and
    /// constant-coefficient surrogates). Requires `sum |a_j| <= abar - delta`
    /// cellwise, which for disjoint cells means `max |a_j| < abar`.
    pub fn with_amplitudes(abar: f64, k: usize, amplitudes: Vec<f64>) -> Result<Self> {
        if k < 1 || amplitudes.len() != k * k {
            return Err(Error::invalid("amplitudes must have length k^2"));
        }
        let amax = amplitudes.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        if !(amax < abar) {
            return Err(Error::invalid("ellipticity requires max |a_j| < abar"));
        }
        Ok(AffineCoefficientModel {
            abar,
            grid_k: k,
            amplitudes,
            decay_t: f64::NAN,
            delta: abar - amax,
        })
    }

    pub fn abar(&self) -> f64 {
        self.abar
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn decay_t(&self) -> f64 {
        self.decay_t
    }

    /// Cells per side of the coefficient grid.
    pub fn grid_k(&self) -> usize {
        self.grid_k
    }

    /// Parametric dimension `d = k^2`.
    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    /// Zero-based subdomain index of the point `x` in the open unit square.
    /// Boundary points go to the smaller index.
    pub fn cell_index(&self, x: (f64, f64)) -> Result<usize> {
        let (x1, x2) = x;
        if !(x1 > 0.0 && x1 < 1.0 && x2 > 0.0 && x2 < 1.0) {
            return Err(Error::invalid(format!("point ({x1}, {x2}) outside ]0,1[^2")));
        }
        let k = self.grid_k as f64;
        let col = (x1 * k).ceil() as usize - 1;
        let row = (x2 * k).ceil() as usize - 1;
        Ok(row * self.grid_k + col)
    }

    /// `a(y)(x) = abar + y_{j(x)} a_{j(x)}`.
    pub fn coefficient_value(&self, y: &ParameterVector, x: (f64, f64)) -> Result<f64> {
        if y.dim() != self.dim() {
            return Err(Error::invalid(format!(
                "parameter dimension {} does not match model d = {}",
                y.dim(),
                self.dim()
            )));
        }
        let j = self.cell_index(x)?;
        Ok(self.abar + y[j] * self.amplitudes[j])
    }

    /// Lower/upper coefficient bounds over all of `Y` (used for Cea-type
    /// checks): `a_min = abar - a_1`, `a_max = abar + a_1`.
    pub fn coefficient_range(&self) -> (f64, f64) {
        let amax = self.amplitudes.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        (self.abar - amax, self.abar + amax)
    }
}
