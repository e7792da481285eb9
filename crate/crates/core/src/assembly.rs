//! P1 finite-element assembly: the bilinear form a(u,v) = ∫ k ∇u·∇v + c uv,
//! the boundary mass matrix, and boundary load vectors.
//!
//! Element contributions are pushed as triplets in triangle order and merged
//! with a stable sort, so assembled matrices are bitwise symmetric and
//! independent of everything except the mesh itself.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::SymSparseMatrix;
use crate::mesh::Mesh;

/// Variable coefficients of the elliptic operator, sampled at triangle
/// centroids (exact for the constant coefficients used throughout).
pub struct Coefficients {
    pub k: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub c: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl Coefficients {
    pub fn constant(k: f64, c: f64) -> Self {
        Self {
            k: Box::new(move |_, _| k),
            c: Box::new(move |_, _| c),
        }
    }
}

/// A scalar field given by its values at mesh vertices.
#[derive(Debug, Clone)]
pub struct NodalField {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl NodalField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_vertices() {
            return Err(Error::Dimensions(format!(
                "field has {} values for a mesh with {} vertices",
                values.len(),
                mesh.num_vertices()
            )));
        }
        Ok(Self { mesh, values })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_mesh(&self, other: &NodalField) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) || *self.mesh == *other.mesh
    }
}

/// Assemble the full N_h x N_h matrix of a(u,v). Row pattern: stiffness
/// (b_i b_j + c_i c_j)/(4|T|) plus the exact P1 mass |T|/6 diagonal,
/// |T|/12 off-diagonal, scaled by the centroid coefficient values.
pub fn assemble_bilinear(mesh: &Mesh, coeff: &Coefficients) -> Result<SymSparseMatrix> {
    let n = mesh.num_vertices();
    let mut triplets = Vec::with_capacity(9 * mesh.num_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.triangle_area(t);
        if !(area > 0.0) {
            return Err(Error::Assembly(format!(
                "triangle {t} degenerated to area {area:.3e}"
            )));
        }
        let [cx, cy] = mesh.centroid(t);
        let (kt, ct) = ((coeff.k)(cx, cy), (coeff.c)(cx, cy));
        if !kt.is_finite() || kt < 0.0 {
            return Err(Error::Assembly(format!(
                "diffusion coefficient {kt:.3e} at centroid of triangle {t} (needs k >= 0)"
            )));
        }
        if !ct.is_finite() || ct < 0.0 {
            return Err(Error::Assembly(format!(
                "reaction coefficient {ct:.3e} at centroid of triangle {t} (needs c >= 0)"
            )));
        }

        let [p0, p1, p2] = tri.map(|v| mesh.vertices()[v]);
        // gradient of basis fn i is (b_i, c_i)/(2|T|), cyclic differences
        let b = [p1[1] - p2[1], p2[1] - p0[1], p0[1] - p1[1]];
        let c = [p2[0] - p1[0], p0[0] - p2[0], p1[0] - p0[0]];
        for r in 0..3 {
            for s in 0..3 {
                let stiff = kt * (b[r] * b[s] + c[r] * c[s]) / (4.0 * area);
                let mass = ct * area * if r == s { 1.0 / 6.0 } else { 1.0 / 12.0 };
                triplets.push((tri[r], tri[s], stiff + mass));
            }
        }
    }
    SymSparseMatrix::from_triplets(n, &triplets)
}

/// Mass matrix of the boundary inner product ⟨u,v⟩_Γ, nonzero only in
/// boundary rows/columns. Per edge of length h: h/3 diagonal, h/6 cross.
pub fn assemble_boundary_mass(mesh: &Mesh) -> SymSparseMatrix {
    let mut triplets = Vec::with_capacity(4 * mesh.boundary_edges().len());
    for &e in mesh.boundary_edges() {
        let h = mesh.edge_length(e);
        triplets.push((e[0], e[0], h / 3.0));
        triplets.push((e[1], e[1], h / 3.0));
        triplets.push((e[0], e[1], h / 6.0));
        triplets.push((e[1], e[0], h / 6.0));
    }
    SymSparseMatrix::from_triplets(mesh.num_vertices(), &triplets)
        .expect("edge mass blocks are symmetric by construction")
}

/// ∫_e g χ ds over one edge by 2-point Gauss (exact through cubic g).
fn edge_load(a: [f64; 2], b: [f64; 2], g: &dyn Fn(f64, f64) -> f64) -> [f64; 2] {
    let h = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    let offset = 0.5 / f64::sqrt(3.0);
    let mut out = [0.0, 0.0];
    for s in [0.5 - offset, 0.5 + offset] {
        let gv = g(a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1]));
        out[0] += 0.5 * h * (1.0 - s) * gv;
        out[1] += 0.5 * h * s * gv;
    }
    out
}

/// Boundary load b_g with entries ⟨g, χ_i⟩_Γ; zero at interior nodes.
pub fn assemble_boundary_load(
    mesh: &Arc<Mesh>,
    g: &(dyn Fn(f64, f64) -> f64 + Sync),
) -> NodalField {
    let mut values = vec![0.0; mesh.num_vertices()];
    for &e in mesh.boundary_edges() {
        let w = edge_load(mesh.vertices()[e[0]], mesh.vertices()[e[1]], &g);
        values[e[0]] += w[0];
        values[e[1]] += w[1];
    }
    NodalField::new(mesh.clone(), values).expect("load vector sized to the mesh")
}
