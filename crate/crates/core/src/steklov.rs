//! The discrete Dirichlet-to-Neumann (Steklov) operator S defined by
//! ⟨S y, v⟩_Γ = a(y, v) for discrete-harmonic y, its boundary Schur
//! complement, Steklov eigenpairs, and the spectral solution of S^α y = g
//! that serves as the reference everywhere else.

use std::sync::Arc;

use rayon::prelude::*;

use crate::assembly::{assemble_bilinear, assemble_boundary_mass, Coefficients, NodalField};
use crate::error::{Error, Result};
use crate::linalg::{
    cg_solve, sym_eig, CsrBlock, DenseMatrix, LinearOperator, SolverOptions, SymSparseMatrix,
};
use crate::mesh::Mesh;

/// Boundary size limit for the dense reference path (Schur complement plus
/// full eigendecomposition); production solves go through Methods I/II.
pub const DENSE_ORACLE_LIMIT: usize = 512;

/// Default spectral lower bound handed to Method II: a 5% safety margin under
/// the computed smallest Steklov eigenvalue.
pub fn default_delta(lambda1: f64) -> f64 {
    0.95 * lambda1
}

/// Fractional boundary-value problem S^α u = g together with the spectral
/// lower bound δ used by the pseudo-parabolic method.
pub struct FractionalProblem {
    pub alpha: f64,
    pub delta: f64,
    pub coeff: Coefficients,
    pub g: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl FractionalProblem {
    pub fn new(
        alpha: f64,
        delta: f64,
        coeff: Coefficients,
        g: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "fractional order must lie in (0,1), got {alpha}"
            )));
        }
        if !(delta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "spectral lower bound must be positive, got {delta}"
            )));
        }
        Ok(Self {
            alpha,
            delta,
            coeff,
            g,
        })
    }

    /// δ must not exceed the smallest Steklov eigenvalue, or S − δI loses
    /// positive semidefiniteness and the evolution scheme its stability.
    pub fn check_spectral_bound(&self, lambda1: f64) -> Result<()> {
        if self.delta > lambda1 {
            return Err(Error::Config(format!(
                "delta = {:.6} exceeds the smallest Steklov eigenvalue {:.6}; \
                 choose delta <= lambda_1 (default {:.6})",
                self.delta,
                lambda1,
                default_delta(lambda1)
            )));
        }
        Ok(())
    }
}

/// Generalized Steklov eigenpairs: S_B ψ_j = λ_j M_B ψ_j with ascending
/// eigenvalues and M_B-orthonormal eigenvectors stored as columns.
pub struct EigenPairSet {
    eigenvalues: Vec<f64>,
    vectors: DenseMatrix,
}

impl EigenPairSet {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn vector(&self, j: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.vectors[(i, j)]).collect()
    }

    /// Spectral solution of S^α y = g from the boundary load b_g:
    /// y = Σ_j λ_j^{-α} (ψ_jᵀ b_g) ψ_j. Exact in the discrete calculus, hence
    /// the oracle for both iterative methods. α = 1 is allowed (plain S⁻¹).
    pub fn fractional_solve(&self, b_gamma: &[f64], alpha: f64) -> Result<Vec<f64>> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "spectral solve needs 0 < alpha <= 1, got {alpha}"
            )));
        }
        if b_gamma.len() != self.len() {
            return Err(Error::Dimensions(format!(
                "boundary load of length {} for {} eigenpairs",
                b_gamma.len(),
                self.len()
            )));
        }
        let n = self.len();
        let mut y = vec![0.0; n];
        for j in 0..n {
            let psi_dot_b: f64 = (0..n).map(|i| self.vectors[(i, j)] * b_gamma[i]).sum();
            let scale = self.eigenvalues[j].powf(-alpha) * psi_dot_b;
            for i in 0..n {
                y[i] += scale * self.vectors[(i, j)];
            }
        }
        Ok(y)
    }
}

/// Solve S_B ψ = λ M_B ψ by Cholesky reduction: with M_B = LLᵀ the problem
/// becomes the ordinary symmetric eigenproblem for L⁻¹ S_B L⁻ᵀ, and back
/// substitution by Lᵀ makes the eigenvectors M_B-orthonormal.
pub fn generalized_eigs(s_b: &DenseMatrix, m_b: &DenseMatrix) -> Result<EigenPairSet> {
    let n = s_b.rows();
    if n == 0 || m_b.rows() != n || s_b.cols() != n || m_b.cols() != n {
        return Err(Error::Dimensions(
            "stiffness and mass matrices must be square, same-sized and nonempty".into(),
        ));
    }
    let chol = m_b.cholesky().map_err(|_| {
        Error::NotPositiveDefinite(
            "boundary mass matrix is not positive definite; boundary extraction is broken".into(),
        )
    })?;

    // C = L⁻¹ S_B L⁻ᵀ, built a column at a time
    let mut half = DenseMatrix::zeros(n, n); // L⁻¹ S_B
    for j in 0..n {
        let col: Vec<f64> = (0..n).map(|i| s_b[(i, j)]).collect();
        let w = chol.solve_lower(&col);
        for i in 0..n {
            half[(i, j)] = w[i];
        }
    }
    let mut c = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let row: Vec<f64> = (0..n).map(|j| half[(i, j)]).collect();
        let w = chol.solve_lower(&row); // forward-solve the transposed rows
        for j in 0..n {
            c[(i, j)] = w[j];
        }
    }
    c.symmetrize();

    let (eigenvalues, u) = sym_eig(&c)?;
    if eigenvalues[0] <= 0.0 {
        return Err(Error::Numerical(format!(
            "smallest Steklov eigenvalue is {:.6e}; operator is not positive definite",
            eigenvalues[0]
        )));
    }
    let mut vectors = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let col: Vec<f64> = (0..n).map(|i| u[(i, j)]).collect();
        let psi = chol.solve_lower_transpose(&col);
        for i in 0..n {
            vectors[(i, j)] = psi[i];
        }
    }
    Ok(EigenPairSet {
        eigenvalues,
        vectors,
    })
}

/// FEM realization of the Dirichlet-to-Neumann operator: the full matrices
/// A and M_Γ plus the interior/boundary partition of A used for Schur
/// complements and discrete-harmonic extensions.
pub struct SteklovOperator {
    mesh: Arc<Mesh>,
    a: SymSparseMatrix,
    m_gamma: SymSparseMatrix,
    m_b: SymSparseMatrix, // boundary restriction of M_Γ (N_Γ x N_Γ)
    a_bb: CsrBlock,
    a_bi: CsrBlock,
    a_ii: SymSparseMatrix,
    interior: Vec<usize>,
}

impl SteklovOperator {
    /// Assemble from mesh and coefficients. Coercivity is enforced here:
    /// k must be strictly positive on every triangle and c strictly positive
    /// on at least one, otherwise A is singular on constants and S undefined.
    pub fn from_mesh(mesh: &Arc<Mesh>, coeff: &Coefficients) -> Result<Self> {
        let mut c_somewhere = false;
        for t in 0..mesh.num_triangles() {
            let [x, y] = mesh.centroid(t);
            let (kt, ct) = ((coeff.k)(x, y), (coeff.c)(x, y));
            if !(kt > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "diffusion coefficient is {kt:.3e} at triangle {t}; the operator needs k > 0"
                )));
            }
            c_somewhere |= ct > 0.0;
        }
        if !c_somewhere {
            return Err(Error::InvalidParameter(
                "reaction coefficient vanishes identically; a(u,u) would be degenerate on \
                 constants and the Steklov operator singular (need c > 0 somewhere)"
                    .into(),
            ));
        }
        let a = assemble_bilinear(mesh, coeff)?;
        let m_gamma = assemble_boundary_mass(mesh);
        Self::new(mesh.clone(), a, m_gamma)
    }

    /// Wrap pre-assembled matrices (must share the mesh's dimensions).
    pub fn new(mesh: Arc<Mesh>, a: SymSparseMatrix, m_gamma: SymSparseMatrix) -> Result<Self> {
        let n = mesh.num_vertices();
        if a.dim() != n || m_gamma.dim() != n {
            return Err(Error::Dimensions(format!(
                "matrices of dimension {} and {} for a mesh with {n} vertices",
                a.dim(),
                m_gamma.dim()
            )));
        }
        let interior = mesh.interior_nodes();
        let mut interior_of = vec![None; n];
        for (pos, &v) in interior.iter().enumerate() {
            interior_of[v] = Some(pos);
        }
        let boundary = mesh.boundary_nodes();
        let a_bb = a.extract_block(boundary, mesh.boundary_index());
        let a_bi = a.extract_block(boundary, &interior_of);
        let a_ii = a.extract_block(&interior, &interior_of).to_sym()?;
        let m_b = m_gamma
            .extract_block(boundary, mesh.boundary_index())
            .to_sym()?;
        Ok(Self {
            mesh,
            a,
            m_gamma,
            m_b,
            a_bb,
            a_bi,
            a_ii,
            interior,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn matrix_a(&self) -> &SymSparseMatrix {
        &self.a
    }

    pub fn matrix_m_gamma(&self) -> &SymSparseMatrix {
        &self.m_gamma
    }

    pub fn num_boundary(&self) -> usize {
        self.mesh.num_boundary_nodes()
    }

    pub fn num_interior(&self) -> usize {
        self.interior.len()
    }

    /// Boundary-ordered values of a full-space vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.mesh.boundary_nodes().iter().map(|&v| full[v]).collect()
    }

    /// Full-space vector with the given boundary values and zero interior.
    pub fn scatter(&self, boundary: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.mesh.num_vertices()];
        for (pos, &v) in self.mesh.boundary_nodes().iter().enumerate() {
            full[v] = boundary[pos];
        }
        full
    }

    /// ‖y‖ in the boundary L² inner product, y given in boundary ordering.
    pub fn boundary_norm(&self, y_b: &[f64]) -> f64 {
        let my = self.m_b.mul_vec(y_b);
        y_b.iter().zip(&my).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
    }

    pub fn boundary_mass_dense(&self) -> DenseMatrix {
        self.m_b.to_dense()
    }

    pub fn boundary_mass_sparse(&self) -> &SymSparseMatrix {
        &self.m_b
    }

    /// Nodal boundary values ĝ of the datum behind a load vector:
    /// M_B ĝ = b_g restricted to Γ (the discrete L²(Γ)-projection).
    pub fn project_boundary_data(&self, b_g: &[f64]) -> Result<Vec<f64>> {
        let rhs = self.restrict(b_g);
        let opts = SolverOptions {
            tol: 1e-13,
            max_iter: None,
        };
        let (ghat, _) = cg_solve(&LinearOperator::from_matrix(&self.m_b), &rhs, &opts)?;
        Ok(ghat)
    }

    /// Dense boundary matrices (S_B, M_B) with
    /// S_B = A_BB − A_BI A_II⁻¹ A_IB, one interior CG solve per boundary
    /// column (columns run in parallel; each solve is deterministic). The
    /// result is checked for symmetry and then symmetrized exactly.
    pub fn schur_complement(&self, opts: &SolverOptions) -> Result<(DenseMatrix, DenseMatrix)> {
        let nb = self.num_boundary();
        if nb > DENSE_ORACLE_LIMIT {
            return Err(Error::InvalidParameter(format!(
                "boundary has {nb} nodes; the dense reference path is limited to \
                 {DENSE_ORACLE_LIMIT} (use the iterative methods instead)"
            )));
        }
        let columns: Vec<Vec<f64>> = (0..nb)
            .into_par_iter()
            .map(|j| -> Result<Vec<f64>> {
                let mut col = self.a_bb.row_dense(j);
                if !self.interior.is_empty() {
                    // A_IB e_j is row j of A_BI read transposed
                    let rhs = self.a_bi.row_dense(j);
                    let (z, _) = cg_solve(&LinearOperator::from_matrix(&self.a_ii), &rhs, opts)?;
                    let correction = self.a_bi.mul_vec(&z);
                    for (c, d) in col.iter_mut().zip(&correction) {
                        *c -= d;
                    }
                }
                Ok(col)
            })
            .collect::<Result<_>>()?;

        let mut s_b = DenseMatrix::zeros(nb, nb);
        for (j, col) in columns.iter().enumerate() {
            for i in 0..nb {
                s_b[(i, j)] = col[i];
            }
        }
        let defect = s_b.symmetry_defect();
        let scale = s_b.max_abs();
        if defect > 1e-10 * scale {
            return Err(Error::Numerical(format!(
                "Schur complement asymmetric beyond tolerance ({defect:.3e} vs scale {scale:.3e}); \
                 interior solves too loose"
            )));
        }
        s_b.symmetrize();
        Ok((s_b, self.boundary_mass_dense()))
    }

    /// Dense-oracle eigendecomposition of the boundary operator.
    pub fn steklov_eigs(&self, opts: &SolverOptions) -> Result<EigenPairSet> {
        let (s_b, m_b) = self.schur_complement(opts)?;
        generalized_eigs(&s_b, &m_b)
    }

    /// Smallest Steklov eigenvalue by inverse iteration x ← A⁻¹ M_Γ x on the
    /// full space, Rayleigh quotient a(x,x)/⟨x,x⟩_Γ. Scales to meshes where
    /// the dense path is unavailable. `x0` seeds the iteration (default: all
    /// ones); a seed with zero boundary trace triggers a boundary-supported
    /// restart rather than a breakdown.
    pub fn smallest_eigenvalue_inverse_iteration(
        &self,
        x0: Option<&[f64]>,
        tol: f64,
        max_iter: usize,
        solver: &SolverOptions,
    ) -> Result<f64> {
        let n = self.mesh.num_vertices();
        let mut x = match x0 {
            Some(v) => {
                if v.len() != n {
                    return Err(Error::Dimensions("seed vector length mismatch".into()));
                }
                v.to_vec()
            }
            None => vec![1.0; n],
        };

        let gamma_norm = |v: &[f64]| -> f64 {
            let mv = self.m_gamma.mul_vec(v);
            v.iter().zip(&mv).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
        };
        let mut norm = gamma_norm(&x);
        let floor = 1e-14 * x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        if norm <= floor {
            // seed is invisible to ⟨·,·⟩_Γ; restart from the boundary itself
            x = self.scatter(&vec![1.0; self.num_boundary()]);
            norm = gamma_norm(&x);
        }
        for v in &mut x {
            *v /= norm;
        }

        let op = LinearOperator::from_matrix(&self.a);
        let mut rayleigh = f64::INFINITY;
        for _ in 0..max_iter {
            let rhs = self.m_gamma.mul_vec(&x);
            let (z, _) = cg_solve(&op, &rhs, solver)?;
            let znorm = gamma_norm(&z);
            if znorm == 0.0 {
                return Err(Error::Numerical(
                    "inverse iteration collapsed to a zero-trace vector".into(),
                ));
            }
            let x_next: Vec<f64> = z.iter().map(|v| v / znorm).collect();
            let ax = self.a.mul_vec(&x_next);
            let quotient: f64 = x_next.iter().zip(&ax).map(|(a, b)| a * b).sum();
            let done = (quotient - rayleigh).abs() <= tol * quotient.abs();
            rayleigh = quotient;
            x = x_next;
            if done {
                return Ok(rayleigh);
            }
        }
        Err(Error::NoConvergence {
            iterations: max_iter,
            residual: rayleigh,
        })
    }

    /// Discrete-harmonic extension: solve A_II u_I = −A_IB y_B and splice the
    /// boundary values back in. Interior rows of A·u vanish by construction.
    pub fn harmonic_extension(&self, y_b: &[f64], opts: &SolverOptions) -> Result<NodalField> {
        if y_b.len() != self.num_boundary() {
            return Err(Error::Dimensions(format!(
                "boundary vector of length {} for {} boundary nodes",
                y_b.len(),
                self.num_boundary()
            )));
        }
        let mut full = self.scatter(y_b);
        if !self.interior.is_empty() {
            let mut rhs = self.a_bi.mul_vec_transpose(y_b);
            for v in &mut rhs {
                *v = -*v;
            }
            let (u_i, _) = cg_solve(&LinearOperator::from_matrix(&self.a_ii), &rhs, opts)?;
            for (pos, &v) in self.interior.iter().enumerate() {
                full[v] = u_i[pos];
            }
        }
        NodalField::new(self.mesh.clone(), full)
    }
}
