//! Method II: S^α y = g recast as a pseudo-parabolic Cauchy problem on the
//! pseudo-time interval [0,1]. With B = A − δ M_Γ the σ-weighted two-level
//! scheme advances a discrete-harmonic full-space field w; its trace at t = 1
//! is the solution. Interior rows of every step system are plain multiples of
//! the interior rows of A, so the full-space iteration reproduces the boundary
//! Schur-complement scheme at sparse cost.

use std::time::Instant;

use crate::assembly::NodalField;
use crate::error::{Error, Result};
use crate::linalg::{cg_solve_from, LinearOperator, SolveReport, SolverOptions};
use crate::steklov::SteklovOperator;

/// Slack factor for the norm-monotonicity check: rounding in the norm
/// evaluation itself must not count as a violation.
const NORM_SLACK: f64 = 1.0 + 1e-12;

/// Interior residual tolerance, relative to ‖A‖_∞·‖w‖_∞.
const HARMONICITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub struct TimeSchemeParams {
    pub n_steps: usize,
    pub sigma: f64,
    pub delta: f64,
}

impl TimeSchemeParams {
    pub fn new(n_steps: usize, sigma: f64, delta: f64) -> Result<Self> {
        if n_steps < 1 {
            return Err(Error::InvalidParameter(
                "time scheme needs at least one step".into(),
            ));
        }
        if !(sigma > 0.0 && sigma <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "scheme weight must satisfy 0 < sigma <= 1, got {sigma}"
            )));
        }
        if !(delta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "spectral shift delta must be positive, got {delta}"
            )));
        }
        Ok(Self {
            n_steps,
            sigma,
            delta,
        })
    }

    pub fn tau(&self) -> f64 {
        1.0 / self.n_steps as f64
    }

    /// The norm-stability guarantee needs σ ≥ 0.5; smaller weights run but
    /// callers should warn.
    pub fn stable(&self) -> bool {
        self.sigma >= 0.5
    }
}

/// The evolving field w^n together with its M_B-norm history.
#[derive(Debug, Clone)]
pub struct TimeEvolutionState {
    step: usize,
    w: NodalField,
    norm_history: Vec<f64>,
}

impl TimeEvolutionState {
    /// Wrap an explicitly built field as a step-0 state.
    pub fn from_field(op: &SteklovOperator, w: NodalField) -> Self {
        let norm = op.boundary_norm(&op.restrict(w.values()));
        Self {
            step: 0,
            w,
            norm_history: vec![norm],
        }
    }

    pub fn current_step(&self) -> usize {
        self.step
    }

    pub fn field(&self) -> &NodalField {
        &self.w
    }

    pub fn into_field(self) -> NodalField {
        self.w
    }

    pub fn norm_history(&self) -> &[f64] {
        &self.norm_history
    }

    /// Number of steps on which the boundary norm grew beyond rounding.
    /// Always zero for σ ≥ 0.5 with an admissible shift.
    pub fn monotonicity_violations(&self) -> usize {
        self.norm_history
            .windows(2)
            .filter(|p| p[1] > p[0] * NORM_SLACK)
            .count()
    }
}

/// Largest interior residual |(A w)_i|; zero for a discrete-harmonic field.
pub fn harmonic_defect(op: &SteklovOperator, w: &NodalField) -> f64 {
    let aw = op.matrix_a().mul_vec(w.values());
    op.mesh()
        .interior_nodes()
        .iter()
        .map(|&v| aw[v].abs())
        .fold(0.0, f64::max)
}

fn check_harmonicity(op: &SteklovOperator, w: &NodalField, context: &str) -> Result<()> {
    let defect = harmonic_defect(op, w);
    let w_inf = w.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let bound = HARMONICITY_TOL * op.matrix_a().infinity_norm() * w_inf;
    if defect > bound {
        return Err(Error::Numerical(format!(
            "{context}: interior residual {defect:.3e} exceeds {bound:.3e}; \
             the field is no longer discrete-harmonic"
        )));
    }
    Ok(())
}

/// w⁰ = δ^{-α} · (discrete-harmonic extension of the boundary datum ĝ),
/// where ĝ solves M_B ĝ = b_g|_Γ.
pub fn initial_state(
    op: &SteklovOperator,
    b_g: &NodalField,
    alpha: f64,
    delta: f64,
    opts: &SolverOptions,
) -> Result<TimeEvolutionState> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "pseudo-parabolic evolution requires 0 < alpha < 1, got {alpha}"
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "spectral shift delta must be positive, got {delta}"
        )));
    }
    let ghat = op.project_boundary_data(b_g.values())?;
    let extension = op.harmonic_extension(&ghat, opts)?;
    let scale = delta.powf(-alpha);
    let w = NodalField::new(
        op.mesh().clone(),
        extension.values().iter().map(|v| scale * v).collect(),
    )?;
    check_harmonicity(op, &w, "initial state")?;
    Ok(TimeEvolutionState::from_field(op, w))
}

/// One step of the σ-weighted scheme: with t_σ = σ t^{n+1} + (1−σ) t^n,
/// c₁ = t_σ/τ + ασ and c₂ = t_σ/τ − α(1−σ),
///   [c₁ A + δ(1/τ − c₁) M_Γ] w^{n+1} = [c₂ A + δ(1/τ − c₂) M_Γ] w^n,
/// solved by CG warm-started at w^n. The left side is SPD whenever δ does not
/// exceed the smallest Steklov eigenvalue; indefiniteness surfaced by CG is
/// reported as a configuration error on δ.
pub fn step(
    op: &SteklovOperator,
    state: &mut TimeEvolutionState,
    params: &TimeSchemeParams,
    alpha: f64,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    if state.step >= params.n_steps {
        return Err(Error::InvalidParameter(format!(
            "evolution already completed its {} steps",
            params.n_steps
        )));
    }
    let tau = params.tau();
    let delta = params.delta;
    let t_n = state.step as f64 * tau;
    let t_sigma = t_n + params.sigma * tau;
    let c1 = t_sigma / tau + alpha * params.sigma;
    let c2 = t_sigma / tau - alpha * (1.0 - params.sigma);

    let a = op.matrix_a();
    let m_gamma = op.matrix_m_gamma();
    let lhs = LinearOperator::new(vec![(c1, a), (delta * (1.0 / tau - c1), m_gamma)])?;
    let aw = a.mul_vec(state.w.values());
    let mw = m_gamma.mul_vec(state.w.values());
    let rhs: Vec<f64> = aw
        .iter()
        .zip(&mw)
        .map(|(a, m)| c2 * a + delta * (1.0 / tau - c2) * m)
        .collect();

    let (w_next, report) = cg_solve_from(&lhs, &rhs, state.w.values(), opts).map_err(|e| {
        match e {
            Error::NotPositiveDefinite(_) | Error::Preconditioner(_) => Error::Config(format!(
                "time-step system at step {} is not positive definite: the spectral \
                 shift delta = {delta} exceeds the smallest Steklov eigenvalue; \
                 choose a smaller shift (default: 0.95 of that eigenvalue)",
                state.step
            )),
            other => other,
        }
    })?;

    state.w = NodalField::new(op.mesh().clone(), w_next)?;
    state.step += 1;
    let norm = op.boundary_norm(&op.restrict(state.w.values()));
    state.norm_history.push(norm);
    check_harmonicity(op, &state.w, "time step")?;
    Ok(report)
}

/// Run the full evolution and return w(1) with aggregate CG statistics
/// (iterations summed over steps, worst per-step residual, one history entry
/// per step).
pub fn solve_method2(
    op: &SteklovOperator,
    b_g: &NodalField,
    alpha: f64,
    params: &TimeSchemeParams,
    opts: &SolverOptions,
) -> Result<(NodalField, SolveReport)> {
    let start = Instant::now();
    let mut state = initial_state(op, b_g, alpha, params.delta, opts)?;
    let mut iterations = 0;
    let mut worst = 0.0f64;
    let mut history = Vec::with_capacity(params.n_steps);
    for _ in 0..params.n_steps {
        let rep = step(op, &mut state, params, alpha, opts)?;
        iterations += rep.iterations;
        worst = worst.max(rep.relative_residual);
        history.push(rep.relative_residual);
    }
    Ok((
        state.into_field(),
        SolveReport {
            tag: format!("method2[N={},sigma={}]", params.n_steps, params.sigma),
            iterations,
            relative_residual: worst,
            wall: start.elapsed(),
            residual_history: history,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_boundary_load, Coefficients};
    use crate::linalg::DenseMatrix;
    use crate::mesh::{generate_quarter_disk, Mesh};
    use crate::quadrature::solve_method1;
    use std::sync::Arc;

    fn coarse_problem(c0: f64) -> (SteklovOperator, NodalField) {
        let mesh = Arc::new(generate_quarter_disk(10).unwrap());
        let op = SteklovOperator::from_mesh(&mesh, &Coefficients::constant(1.0, c0)).unwrap();
        let b = assemble_boundary_load(&mesh, &|_, _| 1.0);
        (op, b)
    }

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    fn lambda1(op: &SteklovOperator) -> f64 {
        op.steklov_eigs(&opts()).unwrap().lambda1()
    }

    fn boundary_e2(op: &SteklovOperator, y: &[f64], reference: &[f64]) -> f64 {
        let diff: Vec<f64> = y.iter().zip(reference).map(|(a, b)| a - b).collect();
        op.boundary_norm(&diff) / op.boundary_norm(reference)
    }

    #[test]
    fn parameter_validation() {
        assert!(TimeSchemeParams::new(0, 0.5, 1.0).is_err());
        assert!(TimeSchemeParams::new(10, 0.0, 1.0).is_err());
        assert!(TimeSchemeParams::new(10, 1.2, 1.0).is_err());
        assert!(TimeSchemeParams::new(10, 0.5, 0.0).is_err());
        let p = TimeSchemeParams::new(4, 0.3, 1.0).unwrap();
        assert!(!p.stable());
        assert_eq!(p.tau(), 0.25);
        assert!(TimeSchemeParams::new(4, 0.5, 1.0).unwrap().stable());
    }

    #[test]
    fn initial_trace_for_unit_shift_is_the_datum() {
        let (op, b) = coarse_problem(5.0);
        let state = initial_state(&op, &b, 0.5, 1.0, &opts()).unwrap();
        for v in op.restrict(state.field().values()) {
            assert!((v - 1.0).abs() < 1e-9, "trace value {v}");
        }
        assert_eq!(state.norm_history().len(), 1);
        assert_eq!(state.current_step(), 0);
    }

    #[test]
    fn initial_trace_scales_by_the_shift_power() {
        let (op, b) = coarse_problem(5.0);
        let state = initial_state(&op, &b, 0.5, 0.9, &opts()).unwrap();
        let expect = 1.0540925533894598; // 0.9^{-1/2}
        for v in op.restrict(state.field().values()) {
            assert!((v - expect).abs() < 1e-9, "trace value {v}");
        }
    }

    #[test]
    fn initial_state_rejects_bad_parameters() {
        let (op, b) = coarse_problem(5.0);
        assert!(initial_state(&op, &b, 0.0, 1.0, &opts()).is_err());
        assert!(initial_state(&op, &b, 1.0, 1.0, &opts()).is_err());
        assert!(initial_state(&op, &b, 0.5, -1.0, &opts()).is_err());
    }

    /// With δ equal to a Steklov eigenvalue and w⁰ the matching eigenvector,
    /// B w = 0: both sides of the step equation collapse to (δ/τ) M_Γ w, so
    /// the state is a fixed point and the warm-started CG accepts it without
    /// iterating. On a mesh with no interior this is bit-exact.
    #[test]
    fn eigenmode_at_the_shift_is_a_bitwise_fixed_point() {
        let mesh = Arc::new(
            Mesh::new(
                vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
                vec![[0, 1, 2]],
                vec![[0, 1], [1, 2], [2, 0]],
                false,
            )
            .unwrap(),
        );
        let op = SteklovOperator::from_mesh(&mesh, &Coefficients::constant(1.0, 1.0)).unwrap();
        let eigs = op.steklov_eigs(&opts()).unwrap();
        let psi = NodalField::new(mesh.clone(), op.scatter(&eigs.vector(0))).unwrap();
        let frozen = psi.values().to_vec();
        let params = TimeSchemeParams::new(4, 0.75, eigs.lambda1()).unwrap();
        let mut state = TimeEvolutionState::from_field(&op, psi);
        for _ in 0..4 {
            let rep = step(&op, &mut state, &params, 0.5, &opts()).unwrap();
            assert_eq!(rep.iterations, 0);
            assert_eq!(state.field().values(), frozen.as_slice());
        }
        assert_eq!(state.monotonicity_violations(), 0);
    }

    #[test]
    fn steps_preserve_interior_harmonicity() {
        let (op, b) = coarse_problem(5.0);
        let params = TimeSchemeParams::new(10, 0.5, default_shift(&op)).unwrap();
        let mut state = initial_state(&op, &b, 0.5, params.delta, &opts()).unwrap();
        let a_norm = op.matrix_a().infinity_norm();
        for _ in 0..10 {
            step(&op, &mut state, &params, 0.5, &opts()).unwrap();
            let w_inf = state
                .field()
                .values()
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(harmonic_defect(&op, state.field()) <= 1e-9 * a_norm * w_inf);
        }
        assert!(step(&op, &mut state, &params, 0.5, &opts()).is_err());
    }

    fn default_shift(op: &SteklovOperator) -> f64 {
        crate::steklov::default_delta(lambda1(op))
    }

    /// The full-space iteration must coincide with the same scheme run on the
    /// dense boundary Schur complement, step by step.
    #[test]
    fn matches_dense_boundary_scheme_stepwise() {
        let (op, b) = coarse_problem(5.0);
        let (s_b, m_b) = op.schur_complement(&opts()).unwrap();
        let nb = op.num_boundary();
        let params = TimeSchemeParams::new(8, 0.5, default_shift(&op)).unwrap();
        let alpha = 0.5;
        let tau = params.tau();

        let mut state = initial_state(&op, &b, alpha, params.delta, &opts()).unwrap();
        let mut y = op.restrict(state.field().values());
        for n in 0..params.n_steps {
            step(&op, &mut state, &params, alpha, &opts()).unwrap();

            let t_sigma = n as f64 * tau + params.sigma * tau;
            let c1 = t_sigma / tau + alpha * params.sigma;
            let c2 = t_sigma / tau - alpha * (1.0 - params.sigma);
            let mut lhs = DenseMatrix::zeros(nb, nb);
            for i in 0..nb {
                for j in 0..nb {
                    lhs[(i, j)] = c1 * s_b[(i, j)]
                        + params.delta * (1.0 / tau - c1) * m_b[(i, j)];
                }
            }
            let sy = s_b.mul_vec(&y);
            let my = m_b.mul_vec(&y);
            let rhs: Vec<f64> = sy
                .iter()
                .zip(&my)
                .map(|(s, m)| c2 * s + params.delta * (1.0 / tau - c2) * m)
                .collect();
            y = lhs.cholesky().unwrap().solve(&rhs);

            let trace = op.restrict(state.field().values());
            let err = boundary_e2(&op, &trace, &y);
            assert!(err <= 1e-10, "step {n}: traces differ by {err:.3e}");
        }
    }

    #[test]
    fn boundary_norm_never_grows_for_stable_weights() {
        let (op, b) = coarse_problem(5.0);
        let delta = default_shift(&op);
        for sigma in [0.5, 0.75, 1.0] {
            let params = TimeSchemeParams::new(50, sigma, delta).unwrap();
            let mut state = initial_state(&op, &b, 0.5, delta, &opts()).unwrap();
            for _ in 0..50 {
                step(&op, &mut state, &params, 0.5, &opts()).unwrap();
            }
            assert_eq!(state.monotonicity_violations(), 0, "sigma = {sigma}");
            assert_eq!(state.norm_history().len(), 51);
        }
    }

    fn sweep_errors(
        op: &SteklovOperator,
        b: &NodalField,
        alpha: f64,
        sigma: f64,
        ns: &[usize],
    ) -> Vec<f64> {
        let oracle = op
            .steklov_eigs(&opts())
            .unwrap()
            .fractional_solve(&op.restrict(b.values()), alpha)
            .unwrap();
        let delta = default_shift(op);
        ns.iter()
            .map(|&n| {
                let params = TimeSchemeParams::new(n, sigma, delta).unwrap();
                let (w, _) = solve_method2(op, b, alpha, &params, &opts()).unwrap();
                boundary_e2(op, &op.restrict(w.values()), &oracle)
            })
            .collect()
    }

    /// Frozen sweep values from an independent run of the identical scheme;
    /// doubling N divides the error by ≈ 4 at the midpoint weight.
    #[test]
    fn midpoint_weight_is_second_order() {
        let (op, b) = coarse_problem(5.0);
        let errs = sweep_errors(&op, &b, 0.5, 0.5, &[20, 40, 80, 160]);
        let frozen = [3.4568e-5, 9.5221e-6, 2.5280e-6, 6.4933e-7];
        for (e, f) in errs.iter().zip(frozen) {
            assert!((e - f).abs() < 0.02 * f, "{e:.4e} vs frozen {f:.4e}");
        }
        for pair in errs.windows(2) {
            let order = (pair[0] / pair[1]).log2();
            assert!((1.7..=2.3).contains(&order), "order {order:.3}");
        }
    }

    #[test]
    fn implicit_weight_is_first_order() {
        let (op, b) = coarse_problem(5.0);
        let errs = sweep_errors(&op, &b, 0.5, 1.0, &[20, 40, 80, 160]);
        let frozen = [2.3919e-3, 1.2279e-3, 6.2240e-4, 3.1338e-4];
        for (e, f) in errs.iter().zip(frozen) {
            assert!((e - f).abs() < 0.02 * f, "{e:.4e} vs frozen {f:.4e}");
        }
        for pair in errs.windows(2) {
            let order = (pair[0] / pair[1]).log2();
            assert!((0.8..=1.2).contains(&order), "order {order:.3}");
        }
    }

    #[test]
    fn long_run_reaches_the_spectral_oracle() {
        let (op, b) = coarse_problem(5.0);
        let errs = sweep_errors(&op, &b, 0.5, 0.5, &[2000]);
        assert!(errs[0] <= 1e-7, "e2 = {:.3e}", errs[0]);
    }

    /// Already at N = 5 the time scheme beats the quadrature method at equal
    /// work by two orders of magnitude.
    #[test]
    fn small_step_counts_are_already_accurate() {
        let (op, b) = coarse_problem(5.0);
        let e_time = sweep_errors(&op, &b, 0.5, 0.5, &[5])[0];
        assert!((e_time - 4.1785e-4).abs() < 0.02 * 4.1785e-4, "{e_time:.4e}");

        let oracle = op
            .steklov_eigs(&opts())
            .unwrap()
            .fractional_solve(&op.restrict(b.values()), 0.5)
            .unwrap();
        let (y, _) = solve_method1(op.matrix_a(), op.matrix_m_gamma(), &b, 0.5, 5, &opts()).unwrap();
        let e_quad = boundary_e2(&op, &op.restrict(y.values()), &oracle);
        assert!(e_time < e_quad / 100.0, "{e_time:.3e} vs {e_quad:.3e}");
    }

    #[test]
    fn excessive_shift_is_reported_as_a_configuration_error() {
        let (op, b) = coarse_problem(5.0);
        let delta = 20.0 * lambda1(&op);
        let params = TimeSchemeParams::new(4, 1.0, delta).unwrap();
        match solve_method2(&op, &b, 0.5, &params, &opts()) {
            Err(Error::Config(msg)) => assert!(msg.contains("delta"), "message: {msg}"),
            other => panic!("expected configuration error, got {other:?}"),
        }
    }
}
