//! Uniform P1 triangulation of the unit square.
//!
//! The square is divided into `grid_n x grid_n` cells, each split into two
//! triangles along the lower-left to upper-right diagonal. Because `grid_n`
//! is a multiple of the coefficient grid `k`, every triangle lies in exactly
//! one coefficient cell `D_j`.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Mesh {
    grid_n: usize,
    coeff_k: usize,
    /// Node coordinates, id = iy * (grid_n + 1) + ix.
    nodes: Vec<(f64, f64)>,
    /// Vertex ids per triangle.
    triangles: Vec<[usize; 3]>,
    /// Zero-based coefficient cell index per triangle.
    triangle_subdomain: Vec<usize>,
    /// Interior index per node (boundary nodes map to None).
    interior: Vec<Option<usize>>,
    n_interior: usize,
}

/// Builds the mesh; `k` is the coefficient grid it must align with.
pub fn build_mesh(grid_n: usize, k: usize) -> Result<Mesh> {
    if grid_n < 2 {
        return Err(Error::invalid("grid_n must be >= 2"));
    }
    if k < 1 || grid_n % k != 0 {
        return Err(Error::invalid(format!(
            "coefficient grid k = {k} must divide grid_n = {grid_n}"
        )));
    }
    let np = grid_n + 1;
    let h = 1.0 / grid_n as f64;
    let mut nodes = Vec::with_capacity(np * np);
    for iy in 0..np {
        for ix in 0..np {
            nodes.push((ix as f64 * h, iy as f64 * h));
        }
    }
    let ratio = grid_n / k;
    let mut triangles = Vec::with_capacity(2 * grid_n * grid_n);
    let mut triangle_subdomain = Vec::with_capacity(2 * grid_n * grid_n);
    for cy in 0..grid_n {
        for cx in 0..grid_n {
            let v00 = cy * np + cx;
            let v10 = v00 + 1;
            let v01 = v00 + np;
            let v11 = v01 + 1;
            let sub = (cy / ratio) * k + (cx / ratio);
            triangles.push([v00, v10, v11]);
            triangle_subdomain.push(sub);
            triangles.push([v00, v11, v01]);
            triangle_subdomain.push(sub);
        }
    }
    let mut interior = vec![None; np * np];
    let mut n_interior = 0;
    for iy in 1..grid_n {
        for ix in 1..grid_n {
            interior[iy * np + ix] = Some(n_interior);
            n_interior += 1;
        }
    }
    Ok(Mesh { grid_n, coeff_k: k, nodes, triangles, triangle_subdomain, interior, n_interior })
}

impl Mesh {
    pub fn grid_n(&self) -> usize {
        self.grid_n
    }

    pub fn coeff_k(&self) -> usize {
        self.coeff_k
    }

    pub fn mesh_size(&self) -> f64 {
        1.0 / self.grid_n as f64
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn node(&self, id: usize) -> (f64, f64) {
        self.nodes[id]
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    pub fn triangle_subdomain(&self, t: usize) -> usize {
        self.triangle_subdomain[t]
    }

    pub fn interior_index(&self, node: usize) -> Option<usize> {
        self.interior[node]
    }

    /// Half-bandwidth of the interior-node stiffness pattern under the
    /// row-major interior ordering.
    pub fn bandwidth(&self) -> usize {
        self.grid_n
    }

    /// Triangle area (all triangles are congruent on this mesh).
    pub fn triangle_area(&self) -> f64 {
        let h = self.mesh_size();
        0.5 * h * h
    }

    /// Gradients of the three barycentric (P1 hat) functions on triangle `t`,
    /// constant per triangle, together with its area.
    pub fn p1_gradients(&self, t: usize) -> ([(f64, f64); 3], f64) {
        let [a, b, c] = self.triangles[t];
        let (xa, ya) = self.nodes[a];
        let (xb, yb) = self.nodes[b];
        let (xc, yc) = self.nodes[c];
        let det = (xb - xa) * (yc - ya) - (xc - xa) * (yb - ya);
        let area = det.abs() / 2.0;
        let ga = ((yb - yc) / det, (xc - xb) / det);
        let gb = ((yc - ya) / det, (xa - xc) / det);
        let gc = ((ya - yb) / det, (xb - xa) / det);
        ([ga, gb, gc], area)
    }
}
