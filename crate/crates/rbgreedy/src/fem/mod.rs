//! P1 finite elements on a uniform triangulation of the unit square for
//! `-div(a(y) grad u) = f` with homogeneous Dirichlet conditions, assembled
//! in affine-decomposed form for fast parametric solves.

mod mesh;
mod operator;
pub mod sparse;

pub use mesh::{build_mesh, Mesh};
pub use operator::{
    assemble, assemble_direct, assemble_vmatrix, error_norms, riesz_residual_norm, v_inner,
    AffineOperator, HiFiSystem, LoadSpec, Snapshot, SparseDirect, VMatrix,
};
pub use sparse::{SolveWorkspace, SolverKind};
