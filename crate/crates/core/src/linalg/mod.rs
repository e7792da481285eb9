//! Linear-algebra kernels: symmetric sparse matrices in compressed-row form,
//! lazily combined operators `sum_k c_k M_k`, a Jacobi-preconditioned conjugate
//! gradient solver, dense Cholesky, and a cyclic-Jacobi symmetric eigensolver.

mod cg;
mod dense;

pub use cg::{cg_solve, cg_solve_from};
pub use dense::{sym_eig, DenseCholesky, DenseMatrix};

use std::time::Duration;

use crate::error::{Error, Result};

/// Square sparse matrix in CSR form, required to be numerically symmetric.
#[derive(Debug, Clone)]
pub struct SymSparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SymSparseMatrix {
    /// Builds from (row, col, value) triplets; duplicate entries are summed in
    /// insertion order, so assembly results are reproducible bit for bit.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::Dimensions(format!(
                    "triplet ({i}, {j}) outside {n}x{n} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Numerical(format!("non-finite entry at ({i}, {j})")));
            }
        }
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&t| (triplets[t].0, triplets[t].1));

        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for &t in &order {
            let (i, j, v) = triplets[t];
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let m = SymSparseMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        };
        let defect = m.symmetry_defect();
        if defect > 0.0 {
            return Err(Error::Numerical(format!(
                "matrix is not symmetric (max |a_ij - a_ji| = {defect:.3e})"
            )));
        }
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        SymSparseMatrix {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Number of stored entries in row `i` (zeros count if explicitly stored).
    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        match self.col_idx[lo..hi].binary_search(&j) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    /// y += c * (self * x)
    pub fn mul_add_into(&self, x: &[f64], y: &mut [f64], c: f64) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[i] += c * acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_add_into(x, &mut y, 1.0);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn infinity_norm(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                self.values[self.row_ptr[i]..self.row_ptr[i + 1]]
                    .iter()
                    .map(|v| v.abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// max |a_ij - a_ji|; zero for every matrix this type accepts.
    pub fn symmetry_defect(&self) -> f64 {
        let mut defect = 0.0f64;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                defect = defect.max((self.values[k] - self.get(j, i)).abs());
            }
        }
        defect
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                d[(i, self.col_idx[k])] = self.values[k];
            }
        }
        d
    }

    /// Entries of rows `rows` restricted to columns `cols`, as a rectangular
    /// CSR block. `col_of[j] = Some(local)` maps global to block columns.
    pub(crate) fn extract_block(&self, rows: &[usize], col_of: &[Option<usize>]) -> CsrBlock {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for &i in rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if let Some(local) = col_of[self.col_idx[k]] {
                    col_idx.push(local);
                    values.push(self.values[k]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        let cols = col_of.iter().flatten().count();
        CsrBlock {
            rows: rows.len(),
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

/// Rectangular CSR block (no symmetry requirement); used for interior/boundary
/// partitions of a full matrix.
#[derive(Debug, Clone)]
pub(crate) struct CsrBlock {
    pub rows: usize,
    pub cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrBlock {
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
        y
    }

    /// y = self' * x (x over rows, y over columns).
    pub fn mul_vec_transpose(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for i in 0..self.rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[k]] += self.values[k] * x[i];
            }
        }
        y
    }

    /// Row `i` scattered into a dense vector of length `cols`.
    pub fn row_dense(&self, i: usize) -> Vec<f64> {
        let mut r = vec![0.0; self.cols];
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            r[self.col_idx[k]] = self.values[k];
        }
        r
    }

    pub fn to_sym(&self) -> Result<SymSparseMatrix> {
        if self.rows != self.cols {
            return Err(Error::Dimensions("block is not square".into()));
        }
        let triplets: Vec<(usize, usize, f64)> = (0..self.rows)
            .flat_map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .map(move |k| (i, self.col_idx[k], self.values[k]))
            })
            .collect();
        SymSparseMatrix::from_triplets(self.rows, &triplets)
    }
}

/// Lazy scaled sum of sparse matrices: `sum_k c_k M_k`. Shifted systems such as
/// e^{2s} A + M never get materialized.
pub struct LinearOperator<'a> {
    n: usize,
    terms: Vec<(f64, &'a SymSparseMatrix)>,
}

impl<'a> LinearOperator<'a> {
    pub fn new(terms: Vec<(f64, &'a SymSparseMatrix)>) -> Result<Self> {
        let n = match terms.first() {
            Some((_, m)) => m.dim(),
            None => return Err(Error::Dimensions("operator needs at least one term".into())),
        };
        for (c, m) in &terms {
            if m.dim() != n {
                return Err(Error::Dimensions(format!(
                    "operator term of dimension {} in a {}-dimensional sum",
                    m.dim(),
                    n
                )));
            }
            if !c.is_finite() {
                return Err(Error::Numerical("non-finite operator coefficient".into()));
            }
        }
        Ok(LinearOperator { n, terms })
    }

    pub fn from_matrix(m: &'a SymSparseMatrix) -> Self {
        LinearOperator {
            n: m.dim(),
            terms: vec![(1.0, m)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for (c, m) in &self.terms {
            m.mul_add_into(x, y, *c);
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.apply_into(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for (c, m) in &self.terms {
            for (i, v) in m.diagonal().into_iter().enumerate() {
                d[i] += c * v;
            }
        }
        d
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Relative residual target ||Ax - b|| <= tol * ||b||.
    pub tol: f64,
    /// Iteration cap; `None` means 10 * dimension.
    pub max_iter: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-12,
            max_iter: None,
        }
    }
}

/// Outcome of an iterative solve (or an aggregate of many).
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub tag: String,
    pub iterations: usize,
    pub relative_residual: f64,
    pub wall: Duration,
    /// Preconditioned residual norms sqrt(r' M^-1 r), one entry per iteration
    /// including the initial one. Recorded for diagnosis; see the monotonicity
    /// tests on the FEM matrices.
    pub residual_history: Vec<f64>,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
