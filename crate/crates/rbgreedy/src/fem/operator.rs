//! Affine operator assembly and high-fidelity solves.
//!
//! The parametric stiffness matrix decomposes as `A(y) = A0 + sum_j y_j A_j`
//! where `A0` carries the constant part `abar` and `A_j` the piecewise
//! contribution `a_j chi_{D_j}`. The coefficient is constant per triangle, so
//! element integration is exact. The V inner product is the unit-coefficient
//! (Dirichlet Laplacian) stiffness form, i.e. the `H^1_0` seminorm.

use crate::error::{Error, Result};
use crate::fem::mesh::Mesh;
use crate::fem::sparse::{solve_spd, BandFactor, CsrPattern, SolveWorkspace, SolverKind};
use crate::params::{AffineCoefficientModel, ParameterVector};
use std::sync::Arc;

/// Right-hand side specification. The constant load is integrated exactly
/// against the P1 hat functions; general loads use a degree-5 quadrature.
#[derive(Clone)]
pub enum LoadSpec {
    Constant(f64),
    Function(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for LoadSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LoadSpec::Constant(c) => write!(f, "LoadSpec::Constant({c})"),
            LoadSpec::Function(_) => write!(f, "LoadSpec::Function(..)"),
        }
    }
}

impl Default for LoadSpec {
    fn default() -> Self {
        LoadSpec::Constant(1.0)
    }
}

/// Degree-5 quadrature on the reference triangle (barycentric points and
/// weights summing to one).
const TRI_QUAD: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    ([0.059715871789770, 0.470142064105115, 0.470142064105115], 0.132394152788506),
    ([0.470142064105115, 0.059715871789770, 0.470142064105115], 0.132394152788506),
    ([0.470142064105115, 0.470142064105115, 0.059715871789770], 0.132394152788506),
    ([0.797426985353087, 0.101286507323456, 0.101286507323456], 0.125939180544827),
    ([0.101286507323456, 0.797426985353087, 0.101286507323456], 0.125939180544827),
    ([0.101286507323456, 0.101286507323456, 0.797426985353087], 0.125939180544827),
];

/// A high-fidelity solution `u_h(y)` over interior nodes, with its cached
/// V-norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub coeffs: Vec<f64>,
    pub vnorm: f64,
}

/// The V inner-product matrix (unit-coefficient stiffness) together with its
/// banded Cholesky factor for Riesz lifts.
#[derive(Debug, Clone)]
pub struct VMatrix {
    pattern: Arc<CsrPattern>,
    values: Vec<f64>,
    factor: BandFactor,
}

impl VMatrix {
    pub fn pattern(&self) -> &Arc<CsrPattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.pattern.n
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        self.pattern.matvec(&self.values, x, out);
    }

    /// `x^T S y`, the V inner product of coefficient vectors.
    pub fn inner_coeffs(&self, x: &[f64], y: &[f64]) -> f64 {
        self.pattern.quadratic_form(&self.values, x, y)
    }

    pub fn norm_coeffs(&self, x: &[f64]) -> f64 {
        self.inner_coeffs(x, x).max(0.0).sqrt()
    }

    /// Riesz lift: solves `S z = r` in place.
    pub fn riesz_in_place(&self, r: &mut [f64]) {
        self.factor.solve_in_place(r);
    }
}

/// `<a, b>_V = a^T S b`.
pub fn v_inner(a: &Snapshot, b: &Snapshot, s: &VMatrix) -> Result<f64> {
    if a.coeffs.len() != s.n() || b.coeffs.len() != s.n() {
        return Err(Error::invalid(format!(
            "dimension mismatch: snapshots {} / {} vs S {}",
            a.coeffs.len(),
            b.coeffs.len(),
            s.n()
        )));
    }
    Ok(s.inner_coeffs(&a.coeffs, &b.coeffs))
}

/// The assembled affine decomposition plus the load vector.
#[derive(Debug, Clone)]
pub struct AffineOperator {
    pattern: Arc<CsrPattern>,
    a0: Vec<f64>,
    components: Vec<Vec<f64>>,
    load: Vec<f64>,
    bw: usize,
    dim: usize,
}

fn build_pattern(mesh: &Mesh) -> Arc<CsrPattern> {
    let n = mesh.n_interior();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::with_capacity(8); n];
    for t in 0..mesh.n_triangles() {
        let tri = mesh.triangle(t);
        for &a in &tri {
            let Some(ia) = mesh.interior_index(a) else { continue };
            for &b in &tri {
                if let Some(ib) = mesh.interior_index(b) {
                    adjacency[ia].push(ib);
                }
            }
        }
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    row_ptr.push(0);
    for nbrs in adjacency.iter_mut() {
        nbrs.sort_unstable();
        nbrs.dedup();
        col_idx.extend_from_slice(nbrs);
        row_ptr.push(col_idx.len());
    }
    Arc::new(CsrPattern { n, row_ptr, col_idx })
}

fn accumulate_stiffness(
    mesh: &Mesh,
    pattern: &CsrPattern,
    values: &mut [f64],
    coefficient: impl Fn(usize) -> f64,
) {
    for t in 0..mesh.n_triangles() {
        let c = coefficient(t);
        if c == 0.0 {
            continue;
        }
        let tri = mesh.triangle(t);
        let (grads, area) = mesh.p1_gradients(t);
        for (a, &na) in tri.iter().enumerate() {
            let Some(ia) = mesh.interior_index(na) else { continue };
            for (b, &nb) in tri.iter().enumerate() {
                let Some(ib) = mesh.interior_index(nb) else { continue };
                let k = c * area * (grads[a].0 * grads[b].0 + grads[a].1 * grads[b].1);
                let idx = pattern.find(ia, ib).expect("pattern covers element couplings");
                values[idx] += k;
            }
        }
    }
}

fn assemble_load(mesh: &Mesh, load: &LoadSpec) -> Vec<f64> {
    let mut f = vec![0.0; mesh.n_interior()];
    match load {
        LoadSpec::Constant(c) => {
            // integral of each hat over a triangle is area / 3, exactly
            let third = mesh.triangle_area() / 3.0;
            for t in 0..mesh.n_triangles() {
                for &node in &mesh.triangle(t) {
                    if let Some(i) = mesh.interior_index(node) {
                        f[i] += c * third;
                    }
                }
            }
        }
        LoadSpec::Function(func) => {
            for t in 0..mesh.n_triangles() {
                let tri = mesh.triangle(t);
                let area = mesh.triangle_area();
                let coords: Vec<(f64, f64)> = tri.iter().map(|&v| mesh.node(v)).collect();
                for (bary, w) in &TRI_QUAD {
                    let x = bary[0] * coords[0].0 + bary[1] * coords[1].0 + bary[2] * coords[2].0;
                    let y = bary[0] * coords[0].1 + bary[1] * coords[1].1 + bary[2] * coords[2].1;
                    let fv = func(x, y);
                    for (a, &node) in tri.iter().enumerate() {
                        if let Some(i) = mesh.interior_index(node) {
                            f[i] += w * area * fv * bary[a];
                        }
                    }
                }
            }
        }
    }
    f
}

/// Assembles the affine decomposition for `model` on `mesh`.
pub fn assemble(mesh: &Mesh, model: &AffineCoefficientModel, load: &LoadSpec) -> Result<AffineOperator> {
    if mesh.coeff_k() != model.grid_k() {
        return Err(Error::invalid(format!(
            "mesh aligned to k = {} but model has k = {}",
            mesh.coeff_k(),
            model.grid_k()
        )));
    }
    let pattern = build_pattern(mesh);
    let mut a0 = vec![0.0; pattern.nnz()];
    accumulate_stiffness(mesh, &pattern, &mut a0, |_| model.abar());
    let d = model.dim();
    let amplitudes = model.amplitudes();
    let mut components = vec![vec![0.0; pattern.nnz()]; d];
    for (j, comp) in components.iter_mut().enumerate() {
        accumulate_stiffness(mesh, &pattern, comp, |t| {
            if mesh.triangle_subdomain(t) == j {
                amplitudes[j]
            } else {
                0.0
            }
        });
    }
    let f = assemble_load(mesh, load);
    Ok(AffineOperator {
        pattern,
        a0,
        components,
        load: f,
        bw: mesh.bandwidth(),
        dim: d,
    })
}

/// The unit-coefficient stiffness matrix with its factorization.
pub fn assemble_vmatrix(mesh: &Mesh) -> Result<VMatrix> {
    let pattern = build_pattern(mesh);
    let mut values = vec![0.0; pattern.nnz()];
    accumulate_stiffness(mesh, &pattern, &mut values, |_| 1.0);
    let factor = BandFactor::factor(&pattern, &values, mesh.bandwidth())?;
    Ok(VMatrix { pattern, values, factor })
}

/// One-shot assembly of `A(y)` directly from the pointwise coefficient, used
/// as the oracle for the affine-consistency checks.
pub fn assemble_direct(mesh: &Mesh, model: &AffineCoefficientModel, y: &ParameterVector) -> Result<SparseDirect> {
    if mesh.coeff_k() != model.grid_k() {
        return Err(Error::invalid("mesh and model grids disagree"));
    }
    let pattern = build_pattern(mesh);
    let mut values = vec![0.0; pattern.nnz()];
    let amplitudes = model.amplitudes();
    accumulate_stiffness(mesh, &pattern, &mut values, |t| {
        let j = mesh.triangle_subdomain(t);
        model.abar() + y[j] * amplitudes[j]
    });
    Ok(SparseDirect { pattern, values })
}

/// Direct assembly result (pattern + values).
pub struct SparseDirect {
    pub pattern: Arc<CsrPattern>,
    pub values: Vec<f64>,
}

impl AffineOperator {
    pub fn n(&self) -> usize {
        self.pattern.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn pattern(&self) -> &Arc<CsrPattern> {
        &self.pattern
    }

    pub fn a0_values(&self) -> &[f64] {
        &self.a0
    }

    pub fn component_values(&self, j: usize) -> &[f64] {
        &self.components[j]
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn workspace(&self) -> SolveWorkspace {
        SolveWorkspace::new(self.pattern.nnz(), self.pattern.n, self.bw)
    }

    /// Writes the values of `A(y) = A0 + sum_j y_j A_j` into `out`.
    pub fn combine(&self, y: &ParameterVector, out: &mut [f64]) {
        out.copy_from_slice(&self.a0);
        for (j, comp) in self.components.iter().enumerate() {
            let yj = y[j];
            if yj == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(comp.iter()) {
                *o += yj * v;
            }
        }
    }

    /// `A(y) x`, using the combined values already in the workspace.
    pub fn apply_combined(&self, combined: &[f64], x: &[f64], out: &mut [f64]) {
        self.pattern.matvec(combined, x, out);
    }

    /// Solves `A(y) u = f` and caches the V-norm of the solution.
    pub fn solve(
        &self,
        y: &ParameterVector,
        s: &VMatrix,
        kind: SolverKind,
        ws: &mut SolveWorkspace,
    ) -> Result<Snapshot> {
        if y.dim() != self.dim {
            return Err(Error::invalid(format!(
                "parameter dimension {} vs operator d = {}",
                y.dim(),
                self.dim
            )));
        }
        let mut combined = std::mem::take(&mut ws.combined);
        self.combine(y, &mut combined);
        let result = solve_spd(&self.pattern, &combined, self.bw, &self.load, kind, ws);
        ws.combined = combined;
        let coeffs = result?;
        let vnorm = s.norm_coeffs(&coeffs);
        Ok(Snapshot { coeffs, vnorm })
    }

}

/// `||f - A(y) u||_{V'}` with a fresh workspace (convenience wrapper).
pub fn riesz_residual_norm(
    op: &AffineOperator,
    y: &ParameterVector,
    reduced_solution: &[f64],
    s: &VMatrix,
) -> Result<f64> {
    if reduced_solution.len() != op.n() {
        return Err(Error::invalid("reduced solution does not live in V_h"));
    }
    let mut combined = vec![0.0; op.pattern.nnz()];
    op.combine(y, &mut combined);
    let mut r = vec![0.0; op.n()];
    op.pattern.matvec(&combined, reduced_solution, &mut r);
    for (ri, fi) in r.iter_mut().zip(op.load.iter()) {
        *ri = fi - *ri;
    }
    let mut z = r.clone();
    s.riesz_in_place(&mut z);
    let norm2: f64 = z.iter().zip(r.iter()).map(|(a, b)| a * b).sum();
    Ok(norm2.max(0.0).sqrt())
}

/// L2 and V-norm (H1 seminorm) errors of a discrete solution against an
/// exact field, by degree-5 quadrature per triangle.
pub fn error_norms(
    mesh: &Mesh,
    coeffs: &[f64],
    exact: impl Fn(f64, f64) -> f64,
    exact_grad: impl Fn(f64, f64) -> (f64, f64),
) -> (f64, f64) {
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for t in 0..mesh.n_triangles() {
        let tri = mesh.triangle(t);
        let (grads, area) = mesh.p1_gradients(t);
        let nodal: Vec<f64> = tri
            .iter()
            .map(|&v| mesh.interior_index(v).map(|i| coeffs[i]).unwrap_or(0.0))
            .collect();
        let uh_grad = (
            nodal[0] * grads[0].0 + nodal[1] * grads[1].0 + nodal[2] * grads[2].0,
            nodal[0] * grads[0].1 + nodal[1] * grads[1].1 + nodal[2] * grads[2].1,
        );
        let coords: Vec<(f64, f64)> = tri.iter().map(|&v| mesh.node(v)).collect();
        for (bary, w) in &TRI_QUAD {
            let x = bary[0] * coords[0].0 + bary[1] * coords[1].0 + bary[2] * coords[2].0;
            let y = bary[0] * coords[0].1 + bary[1] * coords[1].1 + bary[2] * coords[2].1;
            let uh = bary[0] * nodal[0] + bary[1] * nodal[1] + bary[2] * nodal[2];
            let du = exact(x, y) - uh;
            l2 += w * area * du * du;
            let (gx, gy) = exact_grad(x, y);
            let dgx = gx - uh_grad.0;
            let dgy = gy - uh_grad.1;
            h1 += w * area * (dgx * dgx + dgy * dgy);
        }
    }
    (l2.sqrt(), h1.sqrt())
}

/// Everything needed to solve the parametric problem: mesh, model, affine
/// operator, V matrix and solver choice.
#[derive(Debug, Clone)]
pub struct HiFiSystem {
    pub mesh: Mesh,
    pub model: AffineCoefficientModel,
    pub op: AffineOperator,
    pub vmat: VMatrix,
    pub solver: SolverKind,
}

impl HiFiSystem {
    pub fn new(mesh: Mesh, model: AffineCoefficientModel, load: &LoadSpec, solver: SolverKind) -> Result<Self> {
        let op = assemble(&mesh, &model, load)?;
        let vmat = assemble_vmatrix(&mesh)?;
        Ok(HiFiSystem { mesh, model, op, vmat, solver })
    }

    pub fn n(&self) -> usize {
        self.op.n()
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn workspace(&self) -> SolveWorkspace {
        self.op.workspace()
    }

    pub fn solve(&self, y: &ParameterVector, ws: &mut SolveWorkspace) -> Result<Snapshot> {
        self.op.solve(y, &self.vmat, self.solver, ws)
    }

    pub fn solve_alloc(&self, y: &ParameterVector) -> Result<Snapshot> {
        let mut ws = self.workspace();
        self.solve(y, &mut ws)
    }
}
