//! Weak greedy snapshot selection over random training sets.
//!
//! [`ReducedBasis`] maintains a V-orthonormal basis of the reduced space
//! together with the basis-projected affine operators, so that online solves
//! and residual estimates cost `O(poly(n))` independent of the FEM dimension.
//! The drivers in [`run`] implement the certified algorithm (fresh size-`N`
//! training draws per step, stop at `sigma_hat <= eps / (8 m^alpha)` or after
//! `m^{2 alpha}` steps) and the scheduled variant (`N(n) = floor(n^beta)`).

mod residual;
mod run;

pub use residual::ResidualEstimator;
pub use run::{
    estimate_true_error, greedy_step, run_certified, run_scheduled, GreedyStepRecord, GreedyTrace,
    Selector, SnapshotCache, Termination, TrainingSchedule,
};

use crate::error::{Error, Result};
use crate::fem::{HiFiSystem, Snapshot, VMatrix};
use crate::params::ParameterVector;

/// Breakdown tolerance factor: a residual below `1e-12 ||u||_V` is under the
/// re-orthogonalization noise floor.
const BREAKDOWN_FACTOR: f64 = 1e-12;

/// In-place dense Cholesky of a row-major symmetric matrix (lower triangle
/// overwritten by `L`).
pub(crate) fn dense_cholesky_in_place(n: usize, a: &mut [f64]) -> Result<()> {
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= a[i * n + k] * a[j * n + k];
            }
            if i == j {
                if !(sum > 0.0) {
                    return Err(Error::Numerical(format!(
                        "reduced system lost positive definiteness (pivot {sum:.3e} at {i})"
                    )));
                }
                a[i * n + i] = sum.sqrt();
            } else {
                a[i * n + j] = sum / a[j * n + j];
            }
        }
    }
    Ok(())
}

/// Solves `L L^T x = b` in place given the in-place factor from above.
pub(crate) fn dense_cholesky_solve(n: usize, l: &[f64], b: &mut [f64]) {
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * b[k];
        }
        b[i] = sum / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut sum = b[i];
        for k in i + 1..n {
            sum -= l[k * n + i] * b[k];
        }
        b[i] = sum / l[i * n + i];
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// V-orthonormal reduced basis with basis-projected affine operators.
#[derive(Debug, Clone)]
pub struct ReducedBasis {
    param_dim: usize,
    n_h: usize,
    /// Orthonormal basis coefficient vectors.
    basis: Vec<Vec<f64>>,
    /// Cached `S b_i` for fast V inner products.
    s_basis: Vec<Vec<f64>>,
    /// `n x n` row-major projections `B^T A_q B`, q = 0 the constant part.
    reduced_a0: Vec<f64>,
    reduced_components: Vec<Vec<f64>>,
    reduced_load: Vec<f64>,
    provenance: Vec<ParameterVector>,
}

impl ReducedBasis {
    pub fn empty(param_dim: usize, n_h: usize) -> Self {
        ReducedBasis {
            param_dim,
            n_h,
            basis: Vec::new(),
            s_basis: Vec::new(),
            reduced_a0: Vec::new(),
            reduced_components: vec![Vec::new(); param_dim],
            reduced_load: Vec::new(),
            provenance: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn param_dim(&self) -> usize {
        self.param_dim
    }

    pub fn ambient_dim(&self) -> usize {
        self.n_h
    }

    pub fn basis_vector(&self, i: usize) -> &[f64] {
        &self.basis[i]
    }

    pub fn s_basis_vector(&self, i: usize) -> &[f64] {
        &self.s_basis[i]
    }

    pub fn provenance(&self) -> &[ParameterVector] {
        &self.provenance
    }

    pub fn reduced_a0(&self) -> &[f64] {
        &self.reduced_a0
    }

    pub fn reduced_component(&self, j: usize) -> &[f64] {
        &self.reduced_components[j]
    }

    pub fn reduced_load(&self) -> &[f64] {
        &self.reduced_load
    }

    /// Projection error `e_n(u) = ||u - P_{V_n} u||_V`, via the orthonormal
    /// expansion `e^2 = ||u||^2 - sum <u, b_i>^2` (clamped at zero).
    pub fn project_error(&self, u: &Snapshot) -> Result<f64> {
        if u.coeffs.len() != self.n_h {
            return Err(Error::invalid(format!(
                "snapshot dimension {} vs basis ambient {}",
                u.coeffs.len(),
                self.n_h
            )));
        }
        Ok(self.project_error_sq(&u.coeffs, u.vnorm).sqrt())
    }

    pub(crate) fn project_error_sq(&self, coeffs: &[f64], vnorm: f64) -> f64 {
        let mut e2 = vnorm * vnorm;
        for sb in &self.s_basis {
            let c = dot(coeffs, sb);
            e2 -= c * c;
        }
        e2.max(0.0)
    }

    /// Appends the V-normalized residual of `u` via modified Gram-Schmidt
    /// with one re-orthogonalization pass, then updates all reduced operators
    /// incrementally.
    pub fn extend(&mut self, u: &Snapshot, y: ParameterVector, sys: &HiFiSystem) -> Result<()> {
        if u.coeffs.len() != self.n_h {
            return Err(Error::invalid("snapshot dimension mismatch"));
        }
        if y.dim() != self.param_dim {
            return Err(Error::invalid("parameter dimension mismatch"));
        }
        let tolerance = BREAKDOWN_FACTOR * u.vnorm;
        let mut v = u.coeffs.clone();
        for _pass in 0..2 {
            for (b, sb) in self.basis.iter().zip(&self.s_basis) {
                let c = dot(&v, sb);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= c * bi;
                }
            }
        }
        let norm = sys.vmat.norm_coeffs(&v);
        if norm <= tolerance {
            return Err(Error::Breakdown { residual: norm, tolerance });
        }
        for vi in v.iter_mut() {
            *vi /= norm;
        }
        let mut sb_new = vec![0.0; self.n_h];
        sys.vmat.matvec(&v, &mut sb_new);

        // grow the reduced operators: new row/column per affine component
        let n = self.basis.len();
        let mut scratch = vec![0.0; self.n_h];
        let grow = |old: &[f64], col: &[f64]| -> Vec<f64> {
            let mut new = vec![0.0; (n + 1) * (n + 1)];
            for i in 0..n {
                new[i * (n + 1)..i * (n + 1) + n].copy_from_slice(&old[i * n..i * n + n]);
            }
            for i in 0..=n {
                new[i * (n + 1) + n] = col[i];
                new[n * (n + 1) + i] = col[i];
            }
            new
        };
        let mut col = vec![0.0; n + 1];
        sys.op.pattern().matvec(sys.op.a0_values(), &v, &mut scratch);
        for (i, b) in self.basis.iter().enumerate() {
            col[i] = dot(b, &scratch);
        }
        col[n] = dot(&v, &scratch);
        self.reduced_a0 = grow(&self.reduced_a0, &col);
        for j in 0..self.param_dim {
            sys.op.pattern().matvec(sys.op.component_values(j), &v, &mut scratch);
            for (i, b) in self.basis.iter().enumerate() {
                col[i] = dot(b, &scratch);
            }
            col[n] = dot(&v, &scratch);
            self.reduced_components[j] = grow(&self.reduced_components[j], &col);
        }
        self.reduced_load.push(dot(sys.op.load(), &v));

        self.basis.push(v);
        self.s_basis.push(sb_new);
        self.provenance.push(y);
        Ok(())
    }

    /// Assembles the reduced matrix `M(y) = R_0 + sum_j y_j R_j` into `out`.
    pub fn assemble_reduced(&self, y: &[f64], out: &mut [f64]) {
        let n = self.len();
        debug_assert_eq!(out.len(), n * n);
        out.copy_from_slice(&self.reduced_a0);
        for (j, comp) in self.reduced_components.iter().enumerate() {
            let yj = y[j];
            if yj == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(comp) {
                *o += yj * v;
            }
        }
    }

    /// Solves the `n x n` reduced Galerkin system; cost independent of the
    /// FEM dimension.
    pub fn online_solve(&self, y: &ParameterVector) -> Result<Vec<f64>> {
        if y.dim() != self.param_dim {
            return Err(Error::invalid("parameter dimension mismatch"));
        }
        let n = self.len();
        let mut m = vec![0.0; n * n];
        self.assemble_reduced(y.values(), &mut m);
        let mut c = self.reduced_load.clone();
        dense_cholesky_in_place(n, &mut m)?;
        dense_cholesky_solve(n, &m, &mut c);
        Ok(c)
    }

    /// Lifts reduced coefficients back to `V_h`.
    pub fn lift(&self, reduced: &[f64], vmat: &VMatrix) -> Snapshot {
        let mut coeffs = vec![0.0; self.n_h];
        for (c, b) in reduced.iter().zip(&self.basis) {
            for (o, bi) in coeffs.iter_mut().zip(b) {
                *o += c * bi;
            }
        }
        let vnorm = vmat.norm_coeffs(&coeffs);
        Snapshot { coeffs, vnorm }
    }

    /// Lift without norms, writing into a caller buffer (hot paths).
    pub(crate) fn lift_into(&self, reduced: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (c, b) in reduced.iter().zip(&self.basis) {
            for (o, bi) in out.iter_mut().zip(b) {
                *o += c * bi;
            }
        }
    }

    /// Largest deviation of the basis Gram matrix from the identity.
    pub fn gram_defect(&self, vmat: &VMatrix) -> f64 {
        let n = self.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..=i {
                let g = dot(&self.basis[i], &self.s_basis[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        let _ = vmat;
        worst
    }

    /// Largest entrywise deviation of the stored reduced operators from a
    /// recomputation against the full operators.
    pub fn reduced_defect(&self, sys: &HiFiSystem) -> f64 {
        let n = self.len();
        let mut worst: f64 = 0.0;
        let mut scratch = vec![0.0; self.n_h];
        for q in 0..=self.param_dim {
            let values = if q == 0 { sys.op.a0_values() } else { sys.op.component_values(q - 1) };
            let stored = if q == 0 { &self.reduced_a0 } else { &self.reduced_components[q - 1] };
            for j in 0..n {
                sys.op.pattern().matvec(values, &self.basis[j], &mut scratch);
                for i in 0..n {
                    let recomputed = dot(&self.basis[i], &scratch);
                    worst = worst.max((stored[i * n + j] - recomputed).abs());
                }
            }
        }
        for (i, b) in self.basis.iter().enumerate() {
            worst = worst.max((self.reduced_load[i] - dot(sys.op.load(), b)).abs());
        }
        worst
    }

    /// Reconstructs the derived fields (`S b_i`, reduced operators) from raw
    /// persisted arrays. Used by the basis loader.
    pub(crate) fn from_raw_parts(
        param_dim: usize,
        n_h: usize,
        basis: Vec<Vec<f64>>,
        reduced_a0: Vec<f64>,
        reduced_components: Vec<Vec<f64>>,
        reduced_load: Vec<f64>,
        provenance: Vec<ParameterVector>,
        vmat: &VMatrix,
    ) -> Self {
        let s_basis = basis
            .iter()
            .map(|b| {
                let mut sb = vec![0.0; n_h];
                vmat.matvec(b, &mut sb);
                sb
            })
            .collect();
        ReducedBasis {
            param_dim,
            n_h,
            basis,
            s_basis,
            reduced_a0,
            reduced_components,
            reduced_load,
            provenance,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{build_mesh, LoadSpec, SolverKind};
    use crate::params::{build_checkerboard_model, SamplingMeasure};
    use crate::stream::{derive_rng, Role};

    pub(crate) fn small_system(grid_n: usize, k: usize, t: f64, delta: f64) -> HiFiSystem {
        let model = build_checkerboard_model(k, t, delta).unwrap();
        let mesh = build_mesh(grid_n, k).unwrap();
        HiFiSystem::new(mesh, model, &LoadSpec::Constant(1.0), SolverKind::BandedCholesky).unwrap()
    }

    #[test]
    fn empty_basis_projects_to_the_full_norm() {
        let sys = small_system(8, 2, 2.0, 0.5);
        let rb = ReducedBasis::empty(4, sys.n());
        let y = ParameterVector::zero(4);
        let u = sys.solve_alloc(&y).unwrap();
        let e = rb.project_error(&u).unwrap();
        assert_eq!(e, u.vnorm);
    }

    #[test]
    fn extend_normalizes_and_reprojects_to_zero() {
        let sys = small_system(8, 2, 2.0, 0.5);
        let mut rb = ReducedBasis::empty(4, sys.n());
        let y = ParameterVector::zero(4);
        let u = sys.solve_alloc(&y).unwrap();
        rb.extend(&u, y, &sys).unwrap();
        assert_eq!(rb.len(), 1);
        let norm = sys.vmat.norm_coeffs(rb.basis_vector(0));
        assert!((norm - 1.0).abs() < 1e-12);
        let e = rb.project_error(&u).unwrap();
        assert!(e < 1e-10 * u.vnorm, "error {e}");
        // extending with the same snapshot breaks down
        let y2 = ParameterVector::zero(4);
        let err = rb.extend(&u, y2, &sys).unwrap_err();
        assert!(matches!(err, Error::Breakdown { .. }));
    }

    #[test]
    fn gram_identity_after_many_extensions() {
        let sys = small_system(16, 4, 2.0, 0.1);
        let mut rb = ReducedBasis::empty(16, sys.n());
        let mut rng = derive_rng(12, Role::Training, &[0]);
        let mut added = 0;
        while added < 30 {
            let y = SamplingMeasure::Uniform.sample(16, &mut rng);
            let u = sys.solve_alloc(&y).unwrap();
            if rb.project_error(&u).unwrap() > 1e-8 * u.vnorm {
                rb.extend(&u, y, &sys).unwrap();
                added += 1;
            }
        }
        assert!(rb.gram_defect(&sys.vmat) < 1e-10, "gram defect {}", rb.gram_defect(&sys.vmat));
        assert!(rb.reduced_defect(&sys) < 1e-10, "reduced defect {}", rb.reduced_defect(&sys));
    }

    #[test]
    fn project_error_matches_dense_gram_oracle() {
        // Non-orthonormalized snapshot matrix W; the oracle solves the normal
        // equations (W^T S W) c = W^T S u and evaluates the residual norm.
        let sys = small_system(8, 2, 2.0, 0.5);
        let mut rng = derive_rng(13, Role::Training, &[1]);
        for _ in 0..100 {
            let snaps: Vec<Snapshot> = (0..3)
                .map(|_| {
                    let y = SamplingMeasure::Uniform.sample(4, &mut rng);
                    sys.solve_alloc(&y).unwrap()
                })
                .collect();
            let mut rb = ReducedBasis::empty(4, sys.n());
            for s in &snaps {
                let y = ParameterVector::zero(4);
                rb.extend(s, y, &sys).unwrap();
            }
            let yu = SamplingMeasure::Uniform.sample(4, &mut rng);
            let u = sys.solve_alloc(&yu).unwrap();
            let fast = rb.project_error(&u).unwrap();

            // dense oracle on the raw snapshots
            let k = snaps.len();
            let mut gram = vec![0.0; k * k];
            let mut rhs = vec![0.0; k];
            for i in 0..k {
                for j in 0..k {
                    gram[i * k + j] = sys.vmat.inner_coeffs(&snaps[i].coeffs, &snaps[j].coeffs);
                }
                rhs[i] = sys.vmat.inner_coeffs(&snaps[i].coeffs, &u.coeffs);
            }
            let mut l = gram.clone();
            dense_cholesky_in_place(k, &mut l).unwrap();
            let mut c = rhs.clone();
            dense_cholesky_solve(k, &l, &mut c);
            let mut e2 = u.vnorm * u.vnorm;
            for i in 0..k {
                e2 -= rhs[i] * c[i];
            }
            let oracle = e2.max(0.0).sqrt();
            assert!(
                (fast - oracle).abs() <= 1e-9 * oracle.max(1e-12),
                "fast {fast} vs oracle {oracle}"
            );
        }
    }

    #[test]
    fn online_solve_matches_scalar_closed_form_at_n1() {
        let sys = small_system(8, 2, 2.0, 0.5);
        let mut rng = derive_rng(14, Role::Training, &[2]);
        let y0 = SamplingMeasure::Uniform.sample(4, &mut rng);
        let u0 = sys.solve_alloc(&y0).unwrap();
        let mut rb = ReducedBasis::empty(4, sys.n());
        rb.extend(&u0, y0, &sys).unwrap();
        let y = SamplingMeasure::Uniform.sample(4, &mut rng);
        let c = rb.online_solve(&y).unwrap();
        // closed form: c = (f . b1) / (b1 . A(y) b1)
        let mut combined = vec![0.0; sys.op.a0_values().len()];
        sys.op.combine(&y, &mut combined);
        let quad = sys.op.pattern().quadratic_form(&combined, rb.basis_vector(0), rb.basis_vector(0));
        let fb = dot(sys.op.load(), rb.basis_vector(0));
        assert!((c[0] - fb / quad).abs() <= 1e-12 * c[0].abs().max(1e-12));
    }

    #[test]
    fn online_solution_obeys_a_cea_bound() {
        let sys = small_system(16, 2, 2.0, 0.5);
        let (a_min, a_max) = sys.model.coefficient_range();
        let factor = (a_max / a_min).sqrt();
        let mut rng = derive_rng(15, Role::Training, &[3]);
        let mut rb = ReducedBasis::empty(4, sys.n());
        for _ in 0..4 {
            let y = SamplingMeasure::Uniform.sample(4, &mut rng);
            let u = sys.solve_alloc(&y).unwrap();
            if rb.project_error(&u).unwrap() > 1e-9 {
                rb.extend(&u, y, &sys).unwrap();
            }
        }
        for _ in 0..100 {
            let y = SamplingMeasure::Uniform.sample(4, &mut rng);
            let u = sys.solve_alloc(&y).unwrap();
            let best = rb.project_error(&u).unwrap();
            let c = rb.online_solve(&y).unwrap();
            let lifted = rb.lift(&c, &sys.vmat);
            let diff: Vec<f64> =
                u.coeffs.iter().zip(&lifted.coeffs).map(|(a, b)| a - b).collect();
            let err = sys.vmat.norm_coeffs(&diff);
            assert!(
                err <= factor * best + 1e-12,
                "galerkin error {err} vs cea bound {}",
                factor * best
            );
        }
    }

    #[test]
    fn online_from_provenance_reproduces_the_snapshot() {
        let sys = small_system(8, 2, 2.0, 0.5);
        let mut rng = derive_rng(16, Role::Training, &[4]);
        let mut rb = ReducedBasis::empty(4, sys.n());
        let mut kept = Vec::new();
        for _ in 0..3 {
            let y = SamplingMeasure::Uniform.sample(4, &mut rng);
            let u = sys.solve_alloc(&y).unwrap();
            kept.push((y.clone(), u.clone()));
            rb.extend(&u, y, &sys).unwrap();
        }
        for (y, u) in &kept {
            let c = rb.online_solve(y).unwrap();
            let lifted = rb.lift(&c, &sys.vmat);
            let diff: Vec<f64> = u.coeffs.iter().zip(&lifted.coeffs).map(|(a, b)| a - b).collect();
            let err = sys.vmat.norm_coeffs(&diff);
            assert!(err <= 1e-9 * u.vnorm.max(1e-12), "reconstruction error {err}");
        }
    }
}
