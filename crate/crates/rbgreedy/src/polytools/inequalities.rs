//! Monte Carlo checks of the polynomial inequalities used by the random
//! training set analysis: the Nikolskii bound `||P||_inf <= m ||P||_L2` and
//! the superlevel measure bound `rho(|P| >= ||P||_inf / (2m)) >= 3/(4 m^2)`
//! for polynomials on downward closed sets of cardinality `m` (exponent
//! `2 alpha` instead of `2` in the Chebyshev case).

use crate::params::SamplingMeasure;
use crate::polytools::multiindex::DownwardClosedSet;
use crate::polytools::poly::{univariate_values, PolyBasis};
use crate::stream::{par_chunked_fold, sample_rng};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A scalar-valued polynomial `P = sum_{nu in Lambda} c_nu B_nu` with
/// coefficients in an orthonormal tensor basis on a lower set.
#[derive(Debug, Clone)]
pub struct LowerSetPoly {
    set: DownwardClosedSet,
    coeffs: Vec<f64>,
    basis: PolyBasis,
}

/// Flat per-coordinate evaluation tables, reused across many points.
struct Evaluator {
    max_degrees: Vec<u32>,
    scratch: Vec<Vec<f64>>,
}

impl Evaluator {
    fn new(set: &DownwardClosedSet) -> Self {
        let d = set.dim();
        let max_degrees: Vec<u32> = (0..d).map(|j| set.max_degree(j)).collect();
        let scratch = max_degrees.iter().map(|&deg| Vec::with_capacity(deg as usize + 1)).collect();
        Evaluator { max_degrees, scratch }
    }

    fn eval(&mut self, poly: &LowerSetPoly, y: &[f64]) -> f64 {
        for (j, col) in self.scratch.iter_mut().enumerate() {
            univariate_values(poly.basis, y[j], self.max_degrees[j], col);
        }
        let mut acc = 0.0;
        for (nu, &c) in poly.set.indices().iter().zip(&poly.coeffs) {
            let mut v = c;
            for (j, &e) in nu.exponents().iter().enumerate() {
                if e != 0 {
                    v *= self.scratch[j][e as usize];
                }
            }
            acc += v;
        }
        acc
    }
}

impl LowerSetPoly {
    pub fn new(set: DownwardClosedSet, coeffs: Vec<f64>, basis: PolyBasis) -> Self {
        assert_eq!(set.len(), coeffs.len());
        LowerSetPoly { set, coeffs, basis }
    }

    /// Random coefficients in `[-1,1]`, the campaign generator.
    pub fn random<R: Rng + ?Sized>(set: DownwardClosedSet, basis: PolyBasis, rng: &mut R) -> Self {
        let coeffs = (0..set.len()).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        LowerSetPoly { set, coeffs, basis }
    }

    pub fn set(&self) -> &DownwardClosedSet {
        &self.set
    }

    pub fn basis(&self) -> PolyBasis {
        self.basis
    }

    /// Cardinality `m = #(Lambda)`.
    pub fn m(&self) -> usize {
        self.set.len()
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    /// The measure the basis is orthonormal against.
    pub fn natural_measure(&self) -> SamplingMeasure {
        match self.basis {
            PolyBasis::Legendre => SamplingMeasure::Uniform,
            PolyBasis::Chebyshev => SamplingMeasure::Chebyshev,
        }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        Evaluator::new(&self.set).eval(self, y)
    }

    /// Exact `L^2(rho)` norm via orthonormality.
    pub fn exact_l2(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Sup-norm estimate: max of `|P|` over `n_points` Chebyshev-sampled
    /// points plus the `2^min(d,10)` sign-pattern corners. Polynomial sup
    /// norms concentrate near the boundary, and underestimation only makes
    /// the asserted inequalities harder to violate.
    pub fn sup_estimate(&self, n_points: usize, rng: &ChaCha8Rng) -> f64 {
        let d = self.dim();
        let corner_bits = d.min(10);
        let mut best: f64 = 0.0;
        let mut evaluator = Evaluator::new(&self.set);
        let mut corner = vec![1.0f64; d];
        for pattern in 0..(1usize << corner_bits) {
            for (j, c) in corner.iter_mut().enumerate().take(corner_bits) {
                *c = if pattern >> j & 1 == 1 { -1.0 } else { 1.0 };
            }
            best = best.max(evaluator.eval(self, &corner).abs());
        }
        let sampled = par_chunked_fold(
            n_points,
            8192,
            |range| {
                let mut evaluator = Evaluator::new(&self.set);
                let mut y = vec![0.0f64; d];
                let mut block_best: f64 = 0.0;
                for i in range {
                    let mut r = sample_rng(rng, i as u64);
                    for v in y.iter_mut() {
                        *v = SamplingMeasure::Chebyshev.sample_value(&mut r);
                    }
                    block_best = block_best.max(evaluator.eval(self, &y).abs());
                }
                block_best
            },
            f64::max,
            0.0,
        );
        best.max(sampled)
    }
}

/// Result of a Nikolskii inequality check. The assertion the caller makes is
/// `sup_est <= m * l2_est * (1 + 3 * l2_rel_se)` (Legendre; `m^alpha` for
/// Chebyshev), where `l2_rel_se` is the relative standard error of the
/// squared-norm estimate.
#[derive(Debug, Clone, Copy)]
pub struct NikolskiiCheck {
    pub sup_est: f64,
    pub l2_est: f64,
    pub l2_rel_se: f64,
}

/// Estimates both sides of `||P||_inf <= m ||P||_L2(rho)`. `n_grid` controls
/// the sup-norm candidate set, `n_mc` the Monte Carlo `L^2` estimate under
/// the basis' natural measure.
pub fn nikolskii_check(poly: &LowerSetPoly, n_grid: usize, n_mc: usize, rng: &ChaCha8Rng) -> NikolskiiCheck {
    let sup_est = poly.sup_estimate(n_grid, rng);
    let measure = poly.natural_measure();
    let d = poly.dim();
    let mut l2_rng = rng.clone();
    // Separate substream family for the L2 samples.
    l2_rng.set_stream(u64::MAX / 2);
    let (sum, sum_sq) = par_chunked_fold(
        n_mc,
        8192,
        |range| {
            let mut evaluator = Evaluator::new(&poly.set);
            let mut y = vec![0.0f64; d];
            let mut s = 0.0;
            let mut s2 = 0.0;
            for i in range {
                let mut r = sample_rng(&l2_rng, i as u64);
                for v in y.iter_mut() {
                    *v = measure.sample_value(&mut r);
                }
                let p2 = evaluator.eval(poly, &y).powi(2);
                s += p2;
                s2 += p2 * p2;
            }
            (s, s2)
        },
        |(a, b), (c, d)| (a + c, b + d),
        (0.0, 0.0),
    );
    let n = n_mc as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    let se_mean = (var / n).sqrt();
    // relative SE of sqrt(mean) is half the relative SE of mean
    let l2_rel_se = if mean > 0.0 { 0.5 * se_mean / mean } else { 0.0 };
    NikolskiiCheck { sup_est, l2_est: mean.sqrt(), l2_rel_se }
}

/// Monte Carlo estimate of `rho({ y : |P(y)| >= threshold })` where
/// `threshold = threshold_fraction * ||P||_inf-estimate`. For lower sets and
/// `threshold_fraction = 1/(2m)` the measure is at least `3/(4 m^2)`
/// (uniform) or `3/(4 m^{2 alpha})` (Chebyshev).
pub fn superlevel_measure(
    poly: &LowerSetPoly,
    threshold_fraction: f64,
    n_mc: usize,
    rng: &ChaCha8Rng,
) -> f64 {
    let sup_est = poly.sup_estimate(10 * n_mc, rng);
    let threshold = threshold_fraction * sup_est;
    let measure = poly.natural_measure();
    let d = poly.dim();
    let mut mc_rng = rng.clone();
    mc_rng.set_stream(u64::MAX / 2);
    let hits = par_chunked_fold(
        n_mc,
        8192,
        |range| {
            let mut evaluator = Evaluator::new(&poly.set);
            let mut y = vec![0.0f64; d];
            let mut count = 0usize;
            for i in range {
                let mut r = sample_rng(&mc_rng, i as u64);
                for v in y.iter_mut() {
                    *v = measure.sample_value(&mut r);
                }
                if evaluator.eval(poly, &y).abs() >= threshold {
                    count += 1;
                }
            }
            count
        },
        |a, b| a + b,
        0usize,
    );
    hits as f64 / n_mc as f64
}
