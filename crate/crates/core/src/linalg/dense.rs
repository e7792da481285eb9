use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Row-major dense matrix. Only used for boundary-sized problems (the Schur
/// complement of the boundary is dense anyway), so no blocking heroics.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "dimension mismatch in mul_vec");
        let mut y = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            y[i] = acc;
        }
        y
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest |a_ij - a_ji|; zero for an exactly symmetric matrix.
    pub fn symmetry_defect(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Force exact symmetry by averaging mirrored entries.
    pub fn symmetrize(&mut self) {
        assert_eq!(self.rows, self.cols);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }

    pub fn cholesky(&self) -> Result<DenseCholesky> {
        if self.rows != self.cols {
            return Err(Error::Dimensions("Cholesky needs a square matrix".into()));
        }
        let n = self.rows;
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= 0.0 {
                return Err(Error::NotPositiveDefinite(format!(
                    "Cholesky pivot {j} is {d:.3e}"
                )));
            }
            let dj = d.sqrt();
            l[(j, j)] = dj;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / dj;
            }
        }
        Ok(DenseCholesky { l })
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower-triangular Cholesky factor, A = L L'.
#[derive(Debug, Clone)]
pub struct DenseCholesky {
    l: DenseMatrix,
}

impl DenseCholesky {
    pub fn dim(&self) -> usize {
        self.l.rows
    }

    pub fn factor(&self) -> &DenseMatrix {
        &self.l
    }

    /// Solve A x = b via forward + back substitution.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let y = self.solve_lower(b);
        self.solve_lower_transpose(&y)
    }

    /// Solve L y = b.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[(i, k)] * y[k];
            }
            y[i] /= self.l[(i, i)];
        }
        y
    }

    /// Solve L' x = y.
    pub fn solve_lower_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                x[i] -= self.l[(k, i)] * x[k];
            }
            x[i] /= self.l[(i, i)];
        }
        x
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Returns eigenvalues ascending and the matching orthonormal eigenvector
/// columns. Quadratic cost per sweep is fine at boundary sizes (a few
/// hundred), and Jacobi computes small eigenvalues to high relative accuracy,
/// which matters because they get raised to negative fractional powers.
pub fn sym_eig(a: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    if a.rows != a.cols {
        return Err(Error::Dimensions("sym_eig needs a square matrix".into()));
    }
    let n = a.rows;
    if n == 0 {
        return Ok((Vec::new(), DenseMatrix::zeros(0, 0)));
    }
    let defect = a.symmetry_defect();
    let scale = a.max_abs().max(1.0);
    if defect > 1e-12 * scale {
        return Err(Error::Numerical(format!(
            "sym_eig input asymmetric (defect {defect:.3e})"
        )));
    }

    let mut m = a.clone();
    let mut v = DenseMatrix::identity(n);
    let norm = m.frobenius_norm();
    let target = 1e-15 * norm.max(f64::MIN_POSITIVE);

    let off = |m: &DenseMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += 2.0 * m[(i, j)] * m[(i, j)];
            }
        }
        s.sqrt()
    };

    let mut converged = false;
    for _sweep in 0..50 {
        if off(&m) <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                // Golub & Van Loan symmetric Schur rotation
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged && off(&m) > target {
        return Err(Error::Numerical(format!(
            "Jacobi eigensolver stalled at off-diagonal norm {:.3e} (target {target:.3e})",
            off(&m)
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].partial_cmp(&m[(j, j)]).unwrap());
    let eigs: Vec<f64> = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vecs = DenseMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        for k in 0..n {
            vecs[(k, col)] = v[(k, src)];
        }
    }
    Ok((eigs, vecs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cholesky_solves_known_system() {
        // [[4,2],[2,3]] x = [8,7] -> x = [1.25, 1.5]
        let mut a = DenseMatrix::zeros(2, 2);
        a[(0, 0)] = 4.0;
        a[(0, 1)] = 2.0;
        a[(1, 0)] = 2.0;
        a[(1, 1)] = 3.0;
        let x = a.cholesky().unwrap().solve(&[8.0, 7.0]);
        assert!((x[0] - 1.25).abs() < 1e-14);
        assert!((x[1] - 1.5).abs() < 1e-14);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = DenseMatrix::zeros(2, 2);
        a[(0, 0)] = 1.0;
        a[(0, 1)] = 2.0;
        a[(1, 0)] = 2.0;
        a[(1, 1)] = 1.0;
        assert!(matches!(a.cholesky(), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn triangular_solves_invert_each_other() {
        let mut a = DenseMatrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                a[(i, j)] = if i == j { 4.0 } else { 1.0 };
            }
        }
        let ch = a.cholesky().unwrap();
        let b = vec![1.0, 2.0, 3.0];
        let y = ch.solve_lower(&b);
        let x = ch.solve_lower_transpose(&y);
        let r = a.mul_vec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-14);
        }
    }

    #[test]
    fn eig_of_diagonal_is_sorted_identity() {
        let mut a = DenseMatrix::zeros(3, 3);
        a[(0, 0)] = 3.0;
        a[(1, 1)] = 1.0;
        a[(2, 2)] = 2.0;
        let (eigs, vecs) = sym_eig(&a).unwrap();
        assert_eq!(eigs, vec![1.0, 2.0, 3.0]);
        // columns are signed unit vectors picking out the sorted order
        assert_eq!(vecs[(1, 0)].abs(), 1.0);
        assert_eq!(vecs[(2, 1)].abs(), 1.0);
        assert_eq!(vecs[(0, 2)].abs(), 1.0);
    }

    /// 2x2 with hand-computable spectrum: [[2,1],[1,2]] -> 1, 3.
    #[test]
    fn eig_2x2_exact() {
        let mut a = DenseMatrix::zeros(2, 2);
        a[(0, 0)] = 2.0;
        a[(0, 1)] = 1.0;
        a[(1, 0)] = 1.0;
        a[(1, 1)] = 2.0;
        let (eigs, _) = sym_eig(&a).unwrap();
        assert!((eigs[0] - 1.0).abs() < 1e-14);
        assert!((eigs[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn eig_reconstructs_random_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 20;
        let mut a = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = rng.random_range(-1.0..1.0);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        let (eigs, vecs) = sym_eig(&a).unwrap();
        // ascending order
        for w in eigs.windows(2) {
            assert!(w[0] <= w[1]);
        }
        // A v_j = lambda_j v_j and v_j orthonormal
        for j in 0..n {
            let vj: Vec<f64> = (0..n).map(|k| vecs[(k, j)]).collect();
            let av = a.mul_vec(&vj);
            for k in 0..n {
                assert!(
                    (av[k] - eigs[j] * vj[k]).abs() < 1e-12 * a.max_abs() * n as f64,
                    "residual too large at ({k},{j})"
                );
            }
            for i in 0..=j {
                let vi: Vec<f64> = (0..n).map(|k| vecs[(k, i)]).collect();
                let d: f64 = vi.iter().zip(&vj).map(|(a, b)| a * b).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eig_rejects_asymmetric() {
        let mut a = DenseMatrix::zeros(2, 2);
        a[(0, 1)] = 1.0;
        assert!(sym_eig(&a).is_err());
    }
}
