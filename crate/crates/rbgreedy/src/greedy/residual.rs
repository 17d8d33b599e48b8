//! Offline/online split of the residual dual norm.
//!
//! For the reduced Galerkin solution `u_n(y)` with coefficients `c(y)`, the
//! estimator evaluates `||f - A(y) B c||_{V'}` from precomputed Riesz-lift
//! Gram data. Writing `theta = (1, y_1, ..., y_d)` and the stacked vector
//! `xi[(i,q)] = c_i theta_q`,
//!
//! `e^2(y) = <f, S^{-1} f> - 2 w . xi + xi^T G xi`,
//!
//! with `w[(i,q)] = (A_q b_i)^T S^{-1} f` and
//! `G[(i,q),(j,q')] = (A_q b_i)^T S^{-1} (A_{q'} b_j)`. Each evaluation costs
//! `O(((d+1) n)^2)` with no FEM-dimension work; extending the basis costs
//! `d+1` sparse matvecs and Riesz solves.

use crate::error::Result;
use crate::fem::HiFiSystem;
use crate::greedy::{dense_cholesky_in_place, dense_cholesky_solve, ReducedBasis};

#[derive(Debug, Clone)]
pub struct ResidualEstimator {
    /// Number of affine terms, `d + 1`.
    q_count: usize,
    /// `<f, S^{-1} f>`.
    c_ff: f64,
    /// `S^{-1} f`.
    riesz_load: Vec<f64>,
    /// Riesz lifts `S^{-1} (A_q b_i)`, indexed `i * q_count + q`.
    riesz_lifts: Vec<Vec<f64>>,
    /// `w[(i,q)] = (A_q b_i)^T S^{-1} f`.
    w: Vec<f64>,
    /// Gram matrix over the stacked index `(i, q)`, row-major.
    g: Vec<f64>,
    /// Number of basis vectors incorporated so far.
    n: usize,
}

/// Reusable per-thread buffers for estimator evaluations.
#[derive(Debug, Clone, Default)]
pub struct ResidualScratch {
    m: Vec<f64>,
    c: Vec<f64>,
    xi: Vec<f64>,
}

impl ResidualEstimator {
    pub fn new(sys: &HiFiSystem) -> Self {
        let mut riesz_load = sys.op.load().to_vec();
        sys.vmat.riesz_in_place(&mut riesz_load);
        let c_ff = riesz_load.iter().zip(sys.op.load()).map(|(a, b)| a * b).sum();
        ResidualEstimator {
            q_count: sys.dim() + 1,
            c_ff,
            riesz_load,
            riesz_lifts: Vec::new(),
            w: Vec::new(),
            g: Vec::new(),
            n: 0,
        }
    }

    pub fn basis_size(&self) -> usize {
        self.n
    }

    /// Incorporates the newest basis vector of `rb` (call after each extend).
    pub fn extend(&mut self, rb: &ReducedBasis, sys: &HiFiSystem) {
        assert_eq!(rb.len(), self.n + 1, "estimator must be extended once per basis vector");
        let b_new = rb.basis_vector(self.n);
        let qc = self.q_count;
        let n_h = b_new.len();

        // products A_q b_new and their Riesz lifts
        let mut products = Vec::with_capacity(qc);
        for q in 0..qc {
            let values =
                if q == 0 { sys.op.a0_values() } else { sys.op.component_values(q - 1) };
            let mut p = vec![0.0; n_h];
            sys.op.pattern().matvec(values, b_new, &mut p);
            products.push(p);
        }
        let mut lifts_new = Vec::with_capacity(qc);
        for p in &products {
            let mut z = p.clone();
            sys.vmat.riesz_in_place(&mut z);
            lifts_new.push(z);
        }

        // grow G to ((n+1) qc)^2; old entries keep their (i*qc+q) indices
        let old_size = self.n * qc;
        let new_size = (self.n + 1) * qc;
        let mut g = vec![0.0; new_size * new_size];
        for i in 0..old_size {
            g[i * new_size..i * new_size + old_size]
                .copy_from_slice(&self.g[i * old_size..(i + 1) * old_size]);
        }
        // cross terms with existing lifts: G[(i,q),(new,q')] = lift(i,q) . (A_q' b_new)
        for iq in 0..old_size {
            let lift = &self.riesz_lifts[iq];
            for (qp, p) in products.iter().enumerate() {
                let value: f64 = lift.iter().zip(p).map(|(a, b)| a * b).sum();
                let col = old_size + qp;
                g[iq * new_size + col] = value;
                g[col * new_size + iq] = value;
            }
        }
        // new diagonal block: lifts_new[q] . (A_q' b_new)
        for (q, lift) in lifts_new.iter().enumerate() {
            for (qp, p) in products.iter().enumerate() {
                let value: f64 = lift.iter().zip(p).map(|(a, b)| a * b).sum();
                g[(old_size + q) * new_size + (old_size + qp)] = value;
            }
        }
        self.g = g;

        for p in &products {
            let wv: f64 = p.iter().zip(&self.riesz_load).map(|(a, b)| a * b).sum();
            self.w.push(wv);
        }
        self.riesz_lifts.extend(lifts_new);
        self.n += 1;
    }

    /// `||f - A(y) u_n(y)||_{V'}` where `u_n(y)` is the online Galerkin
    /// solution. For an empty basis this is the constant `||f||_{V'}`.
    pub fn eval(&self, rb: &ReducedBasis, y: &[f64], scratch: &mut ResidualScratch) -> Result<f64> {
        let n = self.n;
        debug_assert_eq!(rb.len(), n);
        if n == 0 {
            return Ok(self.c_ff.max(0.0).sqrt());
        }
        let qc = self.q_count;
        scratch.m.resize(n * n, 0.0);
        scratch.c.resize(n, 0.0);
        scratch.xi.resize(n * qc, 0.0);

        rb.assemble_reduced(y, &mut scratch.m);
        scratch.c.copy_from_slice(rb.reduced_load());
        dense_cholesky_in_place(n, &mut scratch.m)?;
        dense_cholesky_solve(n, &scratch.m, &mut scratch.c);

        for i in 0..n {
            let ci = scratch.c[i];
            scratch.xi[i * qc] = ci;
            for q in 1..qc {
                scratch.xi[i * qc + q] = ci * y[q - 1];
            }
        }
        let size = n * qc;
        let mut quad = 0.0;
        let mut cross = 0.0;
        for i in 0..size {
            let xi = scratch.xi[i];
            if xi == 0.0 {
                continue;
            }
            cross += self.w[i] * xi;
            let row = &self.g[i * size..(i + 1) * size];
            let mut acc = 0.0;
            for (gv, xv) in row.iter().zip(&scratch.xi) {
                acc += gv * xv;
            }
            quad += xi * acc;
        }
        Ok((self.c_ff - 2.0 * cross + quad).max(0.0).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{build_mesh, riesz_residual_norm, HiFiSystem, LoadSpec, SolverKind};
    use crate::params::{build_checkerboard_model, SamplingMeasure};
    use crate::stream::{derive_rng, Role};
    use rand::Rng;

    fn system() -> HiFiSystem {
        let model = build_checkerboard_model(2, 2.0, 0.5).unwrap();
        let mesh = build_mesh(16, 2).unwrap();
        HiFiSystem::new(mesh, model, &LoadSpec::Constant(1.0), SolverKind::BandedCholesky).unwrap()
    }

    #[test]
    fn estimator_matches_the_direct_riesz_route() {
        let sys = system();
        let mut rng = derive_rng(41, Role::Training, &[7]);
        let mut rb = ReducedBasis::empty(4, sys.n());
        let mut est = ResidualEstimator::new(&sys);
        let mut scratch = ResidualScratch::default();

        // n = 0: constant ||f||_{V'}
        let y = SamplingMeasure::Uniform.sample(4, &mut rng);
        let fast = est.eval(&rb, y.values(), &mut scratch).unwrap();
        let direct =
            riesz_residual_norm(&sys.op, &y, &vec![0.0; sys.n()], &sys.vmat).unwrap();
        assert!((fast - direct).abs() <= 1e-10 * direct);

        for step in 0..5 {
            let y = SamplingMeasure::Uniform.sample(4, &mut rng);
            let u = sys.solve_alloc(&y).unwrap();
            rb.extend(&u, y, &sys).unwrap();
            est.extend(&rb, &sys);

            for trial in 0..10 {
                let yt = SamplingMeasure::Uniform.sample(4, &mut rng);
                let fast = est.eval(&rb, yt.values(), &mut scratch).unwrap();
                let c = rb.online_solve(&yt).unwrap();
                let lifted = rb.lift(&c, &sys.vmat);
                let direct = riesz_residual_norm(&sys.op, &yt, &lifted.coeffs, &sys.vmat).unwrap();
                assert!(
                    (fast - direct).abs() <= 1e-8 * direct.max(1e-10),
                    "step {step} trial {trial}: fast {fast} vs direct {direct}"
                );
            }
        }
    }

    #[test]
    fn residual_frames_the_true_error() {
        // Empirical frame check: the ratio e / e_bar over random (y, V_n)
        // stays within a modest interval for a well-conditioned model.
        let sys = system();
        let mut rng = derive_rng(43, Role::Training, &[8]);
        let mut ratios = Vec::new();
        for _ in 0..10 {
            let mut rb = ReducedBasis::empty(4, sys.n());
            let mut est = ResidualEstimator::new(&sys);
            let n_basis = 1 + (rng.random::<u32>() % 3) as usize;
            for _ in 0..n_basis {
                let y = SamplingMeasure::Uniform.sample(4, &mut rng);
                let u = sys.solve_alloc(&y).unwrap();
                if rb.project_error(&u).unwrap() > 1e-9 {
                    rb.extend(&u, y, &sys).unwrap();
                    est.extend(&rb, &sys);
                }
            }
            let mut scratch = ResidualScratch::default();
            for _ in 0..5 {
                let y = SamplingMeasure::Uniform.sample(4, &mut rng);
                let ebar = est.eval(&rb, y.values(), &mut scratch).unwrap();
                let u = sys.solve_alloc(&y).unwrap();
                let c = rb.online_solve(&y).unwrap();
                let lifted = rb.lift(&c, &sys.vmat);
                let diff: Vec<f64> =
                    u.coeffs.iter().zip(&lifted.coeffs).map(|(a, b)| a - b).collect();
                let e = sys.vmat.norm_coeffs(&diff);
                if ebar > 1e-12 {
                    ratios.push(e / ebar);
                }
            }
        }
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(0.0f64, f64::max);
        assert!(hi / lo < 10.0, "empirical frame spread {lo}..{hi}");
    }
}
