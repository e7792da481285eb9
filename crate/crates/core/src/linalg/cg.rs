use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, LinearOperator, SolveReport, SolverOptions};

/// Jacobi-preconditioned conjugate gradients. Stops when the true residual
/// satisfies ||op x - b||_2 <= tol ||b||_2; the recurrence residual triggers
/// the check, the true residual confirms it.
pub fn cg_solve(op: &LinearOperator, b: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, SolveReport)> {
    cg_inner(op, b, None, opts)
}

/// Same solver with a warm-start guess; a stationary state converges in zero
/// iterations without touching the iterate.
pub fn cg_solve_from(
    op: &LinearOperator,
    b: &[f64],
    x0: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    cg_inner(op, b, Some(x0), opts)
}

fn cg_inner(
    op: &LinearOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let n = op.dim();
    if b.len() != n {
        return Err(Error::Dimensions(format!(
            "rhs of length {} for operator of dimension {n}",
            b.len()
        )));
    }
    if let Some(x0) = x0 {
        if x0.len() != n {
            return Err(Error::Dimensions("initial guess length mismatch".into()));
        }
    }
    let report = |iterations, relative_residual, residual_history| SolveReport {
        tag: "cg".into(),
        iterations,
        relative_residual,
        wall: start.elapsed(),
        residual_history,
    };

    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], report(0, 0.0, Vec::new())));
    }

    let diag = op.diagonal();
    if let Some(i) = diag.iter().position(|&d| d <= 0.0) {
        return Err(Error::Preconditioner(format!(
            "diagonal entry {i} is {:.3e}; Jacobi preconditioning needs a positive diagonal",
            diag[i]
        )));
    }

    let mut x = match x0 {
        Some(x0) => x0.to_vec(),
        None => vec![0.0; n],
    };
    let mut r = vec![0.0; n];
    let mut q = vec![0.0; n];
    op.apply_into(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }

    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
    let mut rz = dot(&r, &z);
    let mut p = z.clone();
    let mut history = vec![rz.max(0.0).sqrt()];
    let max_iter = opts.max_iter.unwrap_or(10 * n.max(1));

    let mut residual = norm2(&r) / b_norm;
    let mut iterations = 0;
    while iterations < max_iter {
        if residual <= opts.tol {
            // confirm with the true residual before declaring victory
            op.apply_into(&x, &mut q);
            for i in 0..n {
                r[i] = b[i] - q[i];
            }
            residual = norm2(&r) / b_norm;
            if residual <= opts.tol {
                return Ok((x, report(iterations, residual, history)));
            }
            z = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
            rz = dot(&r, &z);
            p.copy_from_slice(&z);
        }
        if rz <= 0.0 {
            // r orthogonal to itself in the M^-1 inner product means r = 0
            return Ok((x, report(iterations, residual, history)));
        }

        op.apply_into(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 {
            return Err(Error::NotPositiveDefinite(format!(
                "negative curvature direction encountered at iteration {iterations} (p'Ap = {pq:.3e})"
            )));
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_next = dot(&r, &z);
        history.push(rz_next.max(0.0).sqrt());
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        residual = norm2(&r) / b_norm;
        iterations += 1;
    }

    if residual <= opts.tol {
        op.apply_into(&x, &mut q);
        for i in 0..n {
            r[i] = b[i] - q[i];
        }
        residual = norm2(&r) / b_norm;
        if residual <= opts.tol {
            return Ok((x, report(iterations, residual, history)));
        }
    }
    Err(Error::NoConvergence {
        iterations,
        residual,
    })
}
