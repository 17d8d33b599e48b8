//! Minimal sparse kernels for the structured-grid FEM systems: symmetric CSR
//! storage, a banded Cholesky factorization (the node ordering makes the
//! stiffness matrices banded with half-bandwidth `grid_n`), and a
//! Jacobi-preconditioned conjugate gradient fallback for large systems.

use crate::error::{Error, Result};
use std::sync::Arc;

/// Shared sparsity pattern (full symmetric storage for fast matvecs).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsrPattern {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
}

impl CsrPattern {
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Position of entry (i, j) in the values array, if present.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.col_idx[lo..hi].binary_search(&j).ok().map(|p| lo + p)
    }

    pub fn matvec(&self, values: &[f64], x: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += values[idx] * x[self.col_idx[idx]];
            }
            out[i] = acc;
        }
    }

    /// `x^T A y` for values over this pattern.
    pub fn quadratic_form(&self, values: &[f64], x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            let mut row = 0.0;
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                row += values[idx] * y[self.col_idx[idx]];
            }
            acc += x[i] * row;
        }
        acc
    }

    pub fn max_symmetry_defect(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[idx];
                if j > i {
                    let ji = self.find(j, i).map(|q| values[q]).unwrap_or(0.0);
                    worst = worst.max((values[idx] - ji).abs());
                }
            }
        }
        worst
    }
}

/// A symmetric sparse matrix with its own values over a shared pattern.
#[derive(Debug, Clone)]
pub struct SparseSym {
    pub pattern: Arc<CsrPattern>,
    pub values: Vec<f64>,
}

impl SparseSym {
    pub fn n(&self) -> usize {
        self.pattern.n
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        self.pattern.matvec(&self.values, x, out);
    }

    pub fn quadratic_form(&self, x: &[f64], y: &[f64]) -> f64 {
        self.pattern.quadratic_form(&self.values, x, y)
    }
}

/// Banded Cholesky factor `A = L L^T`; lower band stored row-major with
/// stride `bw + 1`, entry (i, j) for `i - bw <= j <= i` at
/// `i * (bw+1) + (j - i + bw)`.
fn band_factor_in_place(pattern: &CsrPattern, values: &[f64], bw: usize, band: &mut [f64]) -> Result<()> {
    let n = pattern.n;
    let stride = bw + 1;
    debug_assert_eq!(band.len(), n * stride);
    band.fill(0.0);
    for i in 0..n {
        for idx in pattern.row_ptr[i]..pattern.row_ptr[i + 1] {
            let j = pattern.col_idx[idx];
            if j <= i {
                debug_assert!(i - j <= bw, "entry ({i},{j}) outside band {bw}");
                band[i * stride + (j + bw - i)] = values[idx];
            }
        }
    }
    for i in 0..n {
        let lo = i.saturating_sub(bw);
        let ii = i * stride + bw - i; // so that band[ii + k] = L[i,k]
        for j in lo..i {
            let start = lo.max(j.saturating_sub(bw));
            let jj = j * stride + bw - j;
            let mut sum = band[ii + j];
            for k in start..j {
                sum -= band[ii + k] * band[jj + k];
            }
            band[ii + j] = sum / band[jj + j];
        }
        let mut diag = band[ii + i];
        for k in lo..i {
            let l = band[ii + k];
            diag -= l * l;
        }
        if !(diag > 0.0) {
            return Err(Error::Numerical(format!(
                "Cholesky breakdown at row {i}: pivot {diag:.3e} (matrix not positive definite)"
            )));
        }
        band[ii + i] = diag.sqrt();
    }
    Ok(())
}

fn band_solve_with(n: usize, bw: usize, band: &[f64], x: &mut [f64]) {
    let stride = bw + 1;
    for i in 0..n {
        let lo = i.saturating_sub(bw);
        let ii = i * stride + bw - i;
        let mut sum = x[i];
        for k in lo..i {
            sum -= band[ii + k] * x[k];
        }
        x[i] = sum / band[ii + i];
    }
    for i in (0..n).rev() {
        let hi = (i + bw + 1).min(n);
        let mut sum = x[i];
        for k in i + 1..hi {
            sum -= band[k * stride + (i + bw - k)] * x[k];
        }
        x[i] = sum / band[i * stride + bw];
    }
}

/// An owned banded Cholesky factor, for matrices factored once and solved
/// against many right-hand sides (the V inner-product matrix).
#[derive(Debug, Clone)]
pub struct BandFactor {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandFactor {
    pub fn factor(pattern: &CsrPattern, values: &[f64], bw: usize) -> Result<Self> {
        let mut data = vec![0.0; pattern.n * (bw + 1)];
        band_factor_in_place(pattern, values, bw, &mut data)?;
        Ok(BandFactor { n: pattern.n, bw, data })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        band_solve_with(self.n, self.bw, &self.data, x);
    }
}

/// Reusable buffers so hot solve loops allocate nothing.
#[derive(Debug, Clone)]
pub struct SolveWorkspace {
    pub combined: Vec<f64>,
    band: Vec<f64>,
    residual: Vec<f64>,
    cg_buffers: Vec<Vec<f64>>,
}

impl SolveWorkspace {
    pub fn new(nnz: usize, n: usize, bandwidth: usize) -> Self {
        SolveWorkspace {
            combined: vec![0.0; nnz],
            band: vec![0.0; n * (bandwidth + 1)],
            residual: vec![0.0; n],
            cg_buffers: vec![vec![0.0; n]; 4],
        }
    }
}

/// Solver selection. `Auto` uses banded Cholesky up to `band_limit` unknowns
/// and Jacobi-CG beyond.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverKind {
    BandedCholesky,
    ConjugateGradient { tol: f64, max_iter_factor: usize },
    Auto { band_limit: usize },
}

impl Default for SolverKind {
    fn default() -> Self {
        SolverKind::Auto { band_limit: 200_000 }
    }
}

/// Jacobi-preconditioned conjugate gradient.
pub fn pcg_solve(
    pattern: &CsrPattern,
    values: &[f64],
    rhs: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    buffers: &mut [Vec<f64>],
) -> Result<usize> {
    let n = pattern.n;
    let (r, z, p, ap) = {
        let (a, rest) = buffers.split_at_mut(1);
        let (b, rest) = rest.split_at_mut(1);
        let (c, rest) = rest.split_at_mut(1);
        (&mut a[0], &mut b[0], &mut c[0], &mut rest[0])
    };
    let mut diag_inv = vec![0.0; n];
    for i in 0..n {
        let idx = pattern.find(i, i).ok_or_else(|| Error::Numerical("missing diagonal".into()))?;
        let d = values[idx];
        if !(d > 0.0) {
            return Err(Error::Numerical(format!("nonpositive diagonal {d:.3e} at row {i}")));
        }
        diag_inv[i] = 1.0 / d;
    }
    x.fill(0.0);
    r.copy_from_slice(rhs);
    let rhs_norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    if rhs_norm == 0.0 {
        return Ok(0);
    }
    for i in 0..n {
        z[i] = diag_inv[i] * r[i];
    }
    p.copy_from_slice(z);
    let mut rz: f64 = r.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
    for iter in 0..max_iter {
        pattern.matvec(values, p, ap);
        let pap: f64 = p.iter().zip(ap.iter()).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::Numerical(format!("CG lost positive definiteness: pAp = {pap:.3e}")));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= tol * rhs_norm {
            return Ok(iter + 1);
        }
        for i in 0..n {
            z[i] = diag_inv[i] * r[i];
        }
        let rz_new: f64 = r.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Numerical(format!("CG did not converge in {max_iter} iterations")))
}

/// Solves `A x = b` with the configured strategy. The banded path adds one
/// step of iterative refinement to hold the 1e-10 residual contract.
pub fn solve_spd(
    pattern: &CsrPattern,
    values: &[f64],
    bw: usize,
    rhs: &[f64],
    kind: SolverKind,
    ws: &mut SolveWorkspace,
) -> Result<Vec<f64>> {
    let n = pattern.n;
    let use_band = match kind {
        SolverKind::BandedCholesky => true,
        SolverKind::ConjugateGradient { .. } => false,
        SolverKind::Auto { band_limit } => n <= band_limit,
    };
    if use_band {
        band_factor_in_place(pattern, values, bw, &mut ws.band)?;
        let mut x = rhs.to_vec();
        band_solve_with(n, bw, &ws.band, &mut x);
        pattern.matvec(values, &x, &mut ws.residual);
        for i in 0..n {
            ws.residual[i] = rhs[i] - ws.residual[i];
        }
        band_solve_with(n, bw, &ws.band, &mut ws.residual);
        for i in 0..n {
            x[i] += ws.residual[i];
        }
        Ok(x)
    } else {
        let (tol, factor) = match kind {
            SolverKind::ConjugateGradient { tol, max_iter_factor } => (tol, max_iter_factor),
            _ => (1e-12, 20),
        };
        let mut x = vec![0.0; n];
        pcg_solve(pattern, values, rhs, &mut x, tol, factor * n.max(100), &mut ws.cg_buffers)?;
        Ok(x)
    }
}
