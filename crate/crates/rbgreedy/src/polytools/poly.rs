//! Orthonormal tensor polynomial evaluation via three-term recurrences.
//!
//! Legendre polynomials are normalized in `L^2([-1,1], dt/2)`, so
//! `L_k(1) = sqrt(2k+1)`. Chebyshev polynomials are normalized against the
//! arcsine measure: `T_0 = 1`, `T_k(t) = sqrt(2) cos(k arccos t)`.

use crate::error::{Error, Result};
use crate::params::ParameterVector;
use crate::polytools::multiindex::{is_downward_closed, MultiIndex};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolyBasis {
    Legendre,
    Chebyshev,
}

/// Values `B_0(t), ..., B_deg(t)` of the univariate orthonormal family.
pub(crate) fn univariate_values(basis: PolyBasis, t: f64, deg: u32, out: &mut Vec<f64>) {
    out.clear();
    match basis {
        PolyBasis::Legendre => {
            // Standard Legendre P_k by recurrence, scaled by sqrt(2k+1).
            let mut p_prev = 1.0f64; // P_0
            out.push(1.0);
            if deg == 0 {
                return;
            }
            let mut p = t; // P_1
            out.push(3.0f64.sqrt() * p);
            for k in 1..deg {
                let kf = k as f64;
                let p_next = ((2.0 * kf + 1.0) * t * p - kf * p_prev) / (kf + 1.0);
                p_prev = p;
                p = p_next;
                out.push((2.0 * (kf + 1.0) + 1.0).sqrt() * p);
            }
        }
        PolyBasis::Chebyshev => {
            let sqrt2 = std::f64::consts::SQRT_2;
            let mut c_prev = 1.0f64; // T_0
            out.push(1.0);
            if deg == 0 {
                return;
            }
            let mut c = t; // T_1
            out.push(sqrt2 * c);
            for _ in 1..deg {
                let c_next = 2.0 * t * c - c_prev;
                c_prev = c;
                c = c_next;
                out.push(sqrt2 * c);
            }
        }
    }
}

fn tensor_eval(basis: PolyBasis, nu: &MultiIndex, y: &[f64]) -> f64 {
    let mut value = 1.0;
    let mut scratch = Vec::new();
    for (j, &e) in nu.exponents().iter().enumerate() {
        if e == 0 {
            continue;
        }
        univariate_values(basis, y[j], e, &mut scratch);
        value *= scratch[e as usize];
    }
    value
}

/// `L_nu(y) = prod_j L_{nu_j}(y_j)` with the `L^2(dt/2)` normalization.
pub fn legendre_eval(nu: &MultiIndex, y: &ParameterVector) -> f64 {
    tensor_eval(PolyBasis::Legendre, nu, y.values())
}

/// `T_nu(y) = prod_j T_{nu_j}(y_j)`, orthonormal for the arcsine measure.
pub fn chebyshev_eval(nu: &MultiIndex, y: &ParameterVector) -> f64 {
    tensor_eval(PolyBasis::Chebyshev, nu, y.values())
}

/// Per-coordinate value tables for evaluating many indices at one point.
pub(crate) struct EvalTable {
    tables: Vec<Vec<f64>>,
}

impl EvalTable {
    pub(crate) fn new(basis: PolyBasis, max_degrees: &[u32], y: &[f64]) -> Self {
        let mut tables = Vec::with_capacity(y.len());
        for (j, &deg) in max_degrees.iter().enumerate() {
            let mut col = Vec::with_capacity(deg as usize + 1);
            univariate_values(basis, y[j], deg, &mut col);
            tables.push(col);
        }
        EvalTable { tables }
    }

    pub(crate) fn value(&self, nu: &MultiIndex) -> f64 {
        let mut v = 1.0;
        for (j, &e) in nu.exponents().iter().enumerate() {
            if e != 0 {
                v *= self.tables[j][e as usize];
            }
        }
        v
    }
}

/// `sum_{nu in Lambda} B_nu(y)^2` for a downward closed `Lambda`. For lower
/// sets this is bounded by `#(Lambda)^2` (Legendre) and `#(Lambda)^{2 alpha}`
/// with `alpha = ln 3 / (2 ln 2)` (Chebyshev); the bound does not hold for
/// general index sets, hence the closure check.
pub fn christoffel_sum(indices: &[MultiIndex], y: &ParameterVector, basis: PolyBasis) -> Result<f64> {
    if !is_downward_closed(indices) {
        return Err(Error::invalid("christoffel_sum requires a downward closed set"));
    }
    let d = y.dim();
    let mut max_degrees = vec![0u32; d];
    for nu in indices {
        for (j, &e) in nu.exponents().iter().enumerate() {
            max_degrees[j] = max_degrees[j].max(e);
        }
    }
    let table = EvalTable::new(basis, &max_degrees, y.values());
    Ok(indices.iter().map(|nu| table.value(nu).powi(2)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytools::multiindex::{hyperbolic_cross, random_downward_closed};
    use crate::params::SamplingMeasure;
    use crate::stream::{derive_rng, Role};
    use rand::Rng;

    fn mi(e: &[u32]) -> MultiIndex {
        MultiIndex::new(e.to_vec())
    }

    #[test]
    fn legendre_endpoint_values() {
        let y1 = ParameterVector::new(vec![1.0]).unwrap();
        assert_eq!(legendre_eval(&mi(&[0]), &y1), 1.0);
        assert!((legendre_eval(&mi(&[1]), &y1) - 3.0f64.sqrt()).abs() < 1e-14);
        for k in 0..=20u32 {
            let v = legendre_eval(&mi(&[k]), &y1);
            let expect = (2.0 * k as f64 + 1.0).sqrt();
            assert!((v - expect).abs() < 1e-12 * expect.max(1.0), "k={k}: {v} vs {expect}");
        }
    }

    #[test]
    fn chebyshev_endpoint_values() {
        let y1 = ParameterVector::new(vec![1.0]).unwrap();
        assert_eq!(chebyshev_eval(&mi(&[0]), &y1), 1.0);
        assert!((chebyshev_eval(&mi(&[1]), &y1) - 2.0f64.sqrt()).abs() < 1e-14);
        for k in 2..=20u32 {
            let v = chebyshev_eval(&mi(&[k]), &y1);
            assert!((v - 2.0f64.sqrt()).abs() < 1e-11, "k={k}: {v}");
        }
    }

    #[test]
    fn constant_index_evaluates_to_one_everywhere() {
        let mut rng = derive_rng(21, Role::LemmaMc, &[1]);
        for _ in 0..20 {
            let y = SamplingMeasure::Uniform.sample(5, &mut rng);
            assert_eq!(legendre_eval(&MultiIndex::zero(5), &y), 1.0);
            assert_eq!(chebyshev_eval(&MultiIndex::zero(5), &y), 1.0);
        }
    }

    /// Gauss-Legendre nodes/weights on [-1,1], Newton iteration on P_n.
    fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                // evaluate P_n and P_n' at x
                let mut p0 = 1.0;
                let mut p1 = x;
                for k in 1..n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 1..n {
                let kf = k as f64;
                let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    }

    #[test]
    fn univariate_orthonormality_by_quadrature() {
        // Legendre against dt/2 with Gauss-Legendre; exact for deg <= 20.
        let (nodes, weights) = gauss_legendre(25);
        let mut vals = Vec::new();
        for a in 0..=20u32 {
            for b in a..=20u32 {
                let mut acc = 0.0;
                for (x, w) in nodes.iter().zip(&weights) {
                    univariate_values(PolyBasis::Legendre, *x, a.max(b), &mut vals);
                    acc += 0.5 * w * vals[a as usize] * vals[b as usize];
                }
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((acc - expect).abs() < 1e-12, "L{a},L{b}: {acc}");
            }
        }
        // Chebyshev against the arcsine weight with Gauss-Chebyshev, which is
        // exact for polynomial degree <= 2n-1.
        let n = 25usize;
        for a in 0..=20u32 {
            for b in a..=20u32 {
                let mut acc = 0.0;
                for i in 0..n {
                    let x = (std::f64::consts::PI * (2.0 * i as f64 + 1.0) / (2.0 * n as f64)).cos();
                    univariate_values(PolyBasis::Chebyshev, x, a.max(b), &mut vals);
                    acc += vals[a as usize] * vals[b as usize] / n as f64;
                }
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((acc - expect).abs() < 1e-12, "T{a},T{b}: {acc}");
            }
        }
    }

    #[test]
    fn tensor_chebyshev_orthonormality_monte_carlo() {
        // Spot-check a handful of index pairs under arcsine sampling.
        let d = 3;
        let pairs = [
            (mi(&[1, 0, 0]), mi(&[1, 0, 0])),
            (mi(&[1, 0, 0]), mi(&[0, 1, 0])),
            (mi(&[2, 1, 0]), mi(&[2, 1, 0])),
            (mi(&[2, 1, 0]), mi(&[1, 2, 0])),
            (mi(&[0, 0, 3]), mi(&[0, 0, 3])),
        ];
        let n = 1_000_000usize;
        let mut rng = derive_rng(1234, Role::LemmaMc, &[5]);
        let mut acc = vec![0.0f64; pairs.len()];
        for _ in 0..n {
            let y = SamplingMeasure::Chebyshev.sample(d, &mut rng);
            for (idx, (a, b)) in pairs.iter().enumerate() {
                acc[idx] += chebyshev_eval(a, &y) * chebyshev_eval(b, &y);
            }
        }
        for (idx, (a, b)) in pairs.iter().enumerate() {
            let est = acc[idx] / n as f64;
            let expect = if a == b { 1.0 } else { 0.0 };
            assert!((est - expect).abs() < 0.02, "{a:?},{b:?}: {est}");
        }
    }

    #[test]
    fn christoffel_sum_trivial_and_equality_cases() {
        let mut rng = derive_rng(5, Role::LemmaMc, &[2]);
        let zero_set = vec![MultiIndex::zero(4)];
        for _ in 0..10 {
            let y = SamplingMeasure::Uniform.sample(4, &mut rng);
            assert_eq!(christoffel_sum(&zero_set, &y, PolyBasis::Legendre).unwrap(), 1.0);
        }

        // Univariate Lambda = {0..k} at y = 1: sum (2j+1) = (k+1)^2.
        for k in 0..=10u32 {
            let set: Vec<MultiIndex> = (0..=k).map(|j| mi(&[j])).collect();
            let y = ParameterVector::new(vec![1.0]).unwrap();
            let s = christoffel_sum(&set, &y, PolyBasis::Legendre).unwrap();
            let m2 = ((k + 1) * (k + 1)) as f64;
            assert!((s - m2).abs() <= 1e-10 * m2, "k={k}: {s} vs {m2}");
        }

        // Univariate {0,1} Chebyshev at y = 1: 1 + 2 = 3 = 2^{2 alpha}.
        let set = vec![mi(&[0]), mi(&[1])];
        let y = ParameterVector::new(vec![1.0]).unwrap();
        let s = christoffel_sum(&set, &y, PolyBasis::Chebyshev).unwrap();
        assert!((s - 3.0).abs() < 1e-12);

        // Non-lower input is rejected.
        let bad = vec![mi(&[0]), mi(&[2])];
        assert!(christoffel_sum(&bad, &y, PolyBasis::Legendre).is_err());
    }

    #[test]
    fn christoffel_bounds_on_random_lower_sets() {
        let alpha = (3.0f64).ln() / (2.0 * (2.0f64).ln());
        let mut rng = derive_rng(6, Role::LemmaMc, &[3]);
        for _ in 0..50 {
            let m = rng.random_range(1..=30usize);
            let d = rng.random_range(1..=6usize);
            let set = random_downward_closed(m, d, &mut rng);
            for _ in 0..20 {
                let y = SamplingMeasure::Uniform.sample(d, &mut rng);
                let sl = christoffel_sum(set.indices(), &y, PolyBasis::Legendre).unwrap();
                let sc = christoffel_sum(set.indices(), &y, PolyBasis::Chebyshev).unwrap();
                let m = set.len() as f64;
                assert!(sl <= m * m * (1.0 + 1e-10), "Legendre {sl} > {}", m * m);
                let cap = m.powf(2.0 * alpha);
                assert!(sc <= cap * (1.0 + 1e-10), "Chebyshev {sc} > {cap}");
            }
        }
        // Hyperbolic crosses too.
        for m in [1u64, 2, 4, 8, 16] {
            let set = hyperbolic_cross(m, 3);
            let card = set.len() as f64;
            for _ in 0..20 {
                let y = SamplingMeasure::Uniform.sample(3, &mut rng);
                let s = christoffel_sum(set.indices(), &y, PolyBasis::Legendre).unwrap();
                assert!(s <= card * card * (1.0 + 1e-10));
            }
        }
    }
}
