//! Integer budgets `(m, N)` for the certified greedy algorithm.
//!
//! Under uniform sampling, `m` is the smallest integer with
//! `32 M0 m^{-r+2} <= eps` and `2^{4r+2} m^{-r} <= 1`, and `N` the smallest
//! integer with `(1 - 3/(4 m^2))^N <= eta / m^2`. Under tensor Chebyshev
//! sampling the exponents become `-r+2*alpha` and `-(2*alpha - 1) r`, and
//! `m^2` is replaced by `m^{2*alpha}`, with `alpha = ln 3 / (2 ln 2)`.

use crate::error::{Error, Result};
use crate::params::SamplingMeasure;
use serde::{Deserialize, Serialize};

/// `alpha = ln 3 / (2 ln 2)`, the Chebyshev Christoffel exponent.
pub fn chebyshev_alpha() -> f64 {
    3.0f64.ln() / (2.0 * 2.0f64.ln())
}

fn measure_alpha(measure: SamplingMeasure) -> f64 {
    match measure {
        SamplingMeasure::Uniform => 1.0,
        SamplingMeasure::Chebyshev => chebyshev_alpha(),
    }
}

/// Anything larger is far beyond what any run could afford; refusing here
/// keeps `m^2` and the derived `N` inside exact integer range.
const M_CAP: f64 = (1u64 << 26) as f64;

fn m_satisfies(m: u64, epsilon: f64, r: f64, m0: f64, alpha: f64) -> bool {
    let mf = m as f64;
    let cond1 = 32.0 * m0 * mf.powf(-r + 2.0 * alpha) <= epsilon;
    let cond2 = if alpha == 1.0 {
        // uniform: 2^{4r+2} m^{-r} <= 1
        (4.0 * r + 2.0) * 2.0f64.ln() - r * mf.ln() <= 0.0
    } else {
        (4.0 * r + 2.0) * 2.0f64.ln() - (2.0 * alpha - 1.0) * r * mf.ln() <= 0.0
    };
    cond1 && cond2
}

/// Smallest integer `m >= 1` satisfying both defining inequalities.
pub fn compute_m(epsilon: f64, r: f64, m0: f64, measure: SamplingMeasure) -> Result<u64> {
    if !(epsilon > 0.0) || !(m0 > 0.0) {
        return Err(Error::invalid("epsilon and M0 must be positive"));
    }
    let alpha = measure_alpha(measure);
    if r <= 2.0 * alpha {
        return Err(Error::invalid(format!(
            "rate r = {r} must exceed {} for {measure} sampling",
            2.0 * alpha
        )));
    }
    // Analytic candidates for each condition, then a local scan to pin the
    // exact minimum under floating point.
    let c1 = (32.0 * m0 / epsilon).powf(1.0 / (r - 2.0 * alpha));
    let c2 = match measure {
        SamplingMeasure::Uniform => 2.0f64.powf((4.0 * r + 2.0) / r),
        SamplingMeasure::Chebyshev => 2.0f64.powf((4.0 * r + 2.0) / ((2.0 * alpha - 1.0) * r)),
    };
    let guess = c1.max(c2).max(1.0);
    if !guess.is_finite() || guess > M_CAP {
        return Err(Error::Resource(format!(
            "certified budget infeasible: m would be about {guess:.3e}"
        )));
    }
    let mut m = guess.ceil() as u64;
    while m > 1 && m_satisfies(m - 1, epsilon, r, m0, alpha) {
        m -= 1;
    }
    while !m_satisfies(m, epsilon, r, m0, alpha) {
        m += 1;
        if m as f64 > M_CAP {
            return Err(Error::Resource("certified budget infeasible: m overflow".into()));
        }
    }
    Ok(m)
}

fn n_satisfies(n: u64, ln_one_minus_q: f64, ln_target: f64) -> bool {
    n as f64 * ln_one_minus_q <= ln_target
}

/// Smallest integer `N >= 1` with `(1 - 3/(4 m^{2 alpha}))^N <= eta / m^{2 alpha}`.
pub fn compute_n_draws(m: u64, eta: f64, measure: SamplingMeasure) -> Result<u64> {
    if m < 1 {
        return Err(Error::invalid("m must be >= 1"));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::invalid("eta must lie in (0,1)"));
    }
    let alpha = measure_alpha(measure);
    let m2a = (m as f64).powf(2.0 * alpha);
    let q = 3.0 / (4.0 * m2a);
    let ln_one_minus_q = (-q).ln_1p();
    let ln_target = eta.ln() - m2a.ln();
    let mut n = (ln_target / ln_one_minus_q).ceil().max(1.0) as u64;
    while n > 1 && n_satisfies(n - 1, ln_one_minus_q, ln_target) {
        n -= 1;
    }
    while !n_satisfies(n, ln_one_minus_q, ln_target) {
        n += 1;
    }
    Ok(n)
}

/// The resolved certified budget: user inputs plus the computed `(m, N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifiedBudget {
    pub epsilon: f64,
    pub eta: f64,
    pub r: f64,
    pub m0: f64,
    pub measure: SamplingMeasure,
    pub alpha: f64,
    pub m: u64,
    pub n_draws: u64,
}

impl CertifiedBudget {
    pub fn new(
        epsilon: f64,
        eta: f64,
        r: f64,
        m0: f64,
        measure: SamplingMeasure,
    ) -> Result<Self> {
        let m = compute_m(epsilon, r, m0, measure)?;
        let n_draws = compute_n_draws(m, eta, measure)?;
        Ok(CertifiedBudget {
            epsilon,
            eta,
            r,
            m0,
            measure,
            alpha: measure_alpha(measure),
            m,
            n_draws,
        })
    }

    /// Stopping threshold `eps / (8 m^alpha)`.
    pub fn threshold(&self) -> f64 {
        self.epsilon / (8.0 * (self.m as f64).powf(self.alpha))
    }

    /// Maximum number of greedy steps, `floor(m^{2 alpha})`.
    pub fn step_cap(&self) -> u64 {
        (self.m as f64).powf(2.0 * self.alpha).floor() as u64
    }
}
