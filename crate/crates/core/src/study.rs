//! Convergence studies: error metrics against the dense spectral reference,
//! the limiting-case solvers (Dirichlet data at α = 0, Neumann data at α = 1),
//! and the sweep drivers behind the error tables.

use std::sync::Arc;

use rayon::prelude::*;

use crate::assembly::{
    assemble_bilinear, assemble_boundary_load, Coefficients, NodalField,
};
use crate::error::{Error, Result};
use crate::linalg::{cg_solve, LinearOperator, SolverOptions, SymSparseMatrix};
use crate::mesh::{generate_quarter_disk, Mesh};
use crate::pseudo_parabolic::{initial_state, step, TimeSchemeParams};
use crate::quadrature::solve_method1;
use crate::steklov::{default_delta, EigenPairSet, SteklovOperator};

/// The three quarter-disk grids of the studies: a 10-ring fan and its two
/// uniform refinements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridKind {
    Coarse,
    Medium,
    Fine,
}

impl GridKind {
    pub fn all() -> [GridKind; 3] {
        [GridKind::Coarse, GridKind::Medium, GridKind::Fine]
    }

    pub fn label(self) -> &'static str {
        match self {
            GridKind::Coarse => "coarse",
            GridKind::Medium => "medium",
            GridKind::Fine => "fine",
        }
    }

    pub fn build(self) -> Mesh {
        let coarse = generate_quarter_disk(10).expect("10-ring fan is a valid parameter");
        match self {
            GridKind::Coarse => coarse,
            GridKind::Medium => coarse.refine_uniform(),
            GridKind::Fine => coarse.refine_uniform().refine_uniform(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "coarse" => Ok(GridKind::Coarse),
            "medium" => Ok(GridKind::Medium),
            "fine" => Ok(GridKind::Fine),
            other => Err(Error::Config(format!(
                "unknown grid '{other}' (expected coarse, medium or fine)"
            ))),
        }
    }
}

/// Relative errors of a field against a reference on the same mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorTriple {
    /// max-norm over all nodes, relative to the reference max-norm
    pub e_inf: f64,
    /// boundary L² norm (boundary mass quadratic form)
    pub e2_gamma: f64,
    /// domain L² norm (mass matrix with k = 0, c = 1)
    pub e2_omega: f64,
}

/// Domain mass matrix for the L²(Ω) norm.
pub fn mass_omega(mesh: &Mesh) -> SymSparseMatrix {
    assemble_bilinear(mesh, &Coefficients::constant(0.0, 1.0))
        .expect("mass assembly cannot fail on a valid mesh")
}

pub fn compute_errors(
    y: &NodalField,
    y_ref: &NodalField,
    m_gamma: &SymSparseMatrix,
    omega_mass: &SymSparseMatrix,
) -> Result<ErrorTriple> {
    if !y.same_mesh(y_ref) {
        return Err(Error::Dimensions(
            "error metrics need both fields on one mesh".into(),
        ));
    }
    let quad = |m: &SymSparseMatrix, v: &[f64]| {
        let mv = m.mul_vec(v);
        v.iter().zip(&mv).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
    };
    let diff: Vec<f64> = y
        .values()
        .iter()
        .zip(y_ref.values())
        .map(|(a, b)| a - b)
        .collect();
    let ref_inf = y_ref.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let ref_gamma = quad(m_gamma, y_ref.values());
    let ref_omega = quad(omega_mass, y_ref.values());
    if ref_inf == 0.0 || ref_gamma == 0.0 || ref_omega == 0.0 {
        return Err(Error::InvalidParameter(
            "reference solution vanishes; relative errors are undefined".into(),
        ));
    }
    let diff_inf = diff.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(ErrorTriple {
        e_inf: diff_inf / ref_inf,
        e2_gamma: quad(m_gamma, &diff) / ref_gamma,
        e2_omega: quad(omega_mass, &diff) / ref_omega,
    })
}

/// α = 0 limit: the field equals the boundary datum on Γ and its
/// discrete-harmonic extension inside.
pub fn solve_dirichlet(
    op: &SteklovOperator,
    b_g: &NodalField,
    opts: &SolverOptions,
) -> Result<NodalField> {
    let ghat = op.project_boundary_data(b_g.values())?;
    op.harmonic_extension(&ghat, opts)
}

/// α = 1 limit: one CG solve of A u = b_g.
pub fn solve_neumann(
    op: &SteklovOperator,
    b_g: &NodalField,
    opts: &SolverOptions,
) -> Result<NodalField> {
    let (u, _) = cg_solve(&LinearOperator::from_matrix(op.matrix_a()), b_g.values(), opts)?;
    NodalField::new(op.mesh().clone(), u)
}

pub fn field_extrema(y: &NodalField) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in y.values() {
        min = min.min(v);
        max = max.max(v);
    }
    (min, max)
}

/// One grid + one coefficient pair, with the dense spectral reference built
/// once and shared across every parameter point.
pub struct StudyContext {
    grid: GridKind,
    c0: f64,
    op: SteklovOperator,
    b_g: NodalField,
    eigs: EigenPairSet,
    omega_mass: SymSparseMatrix,
}

impl StudyContext {
    /// g ≡ 1, k ≡ 1 — the data of all published runs.
    pub fn new(grid: GridKind, c0: f64, opts: &SolverOptions) -> Result<Self> {
        let mesh = Arc::new(grid.build());
        let op = SteklovOperator::from_mesh(&mesh, &Coefficients::constant(1.0, c0))?;
        let b_g = assemble_boundary_load(&mesh, &|_, _| 1.0);
        let eigs = op.steklov_eigs(opts)?;
        let omega_mass = mass_omega(&mesh);
        Ok(Self {
            grid,
            c0,
            op,
            b_g,
            eigs,
            omega_mass,
        })
    }

    pub fn grid(&self) -> GridKind {
        self.grid
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn operator(&self) -> &SteklovOperator {
        &self.op
    }

    pub fn load(&self) -> &NodalField {
        &self.b_g
    }

    pub fn eigs(&self) -> &EigenPairSet {
        &self.eigs
    }

    pub fn omega_mass(&self) -> &SymSparseMatrix {
        &self.omega_mass
    }

    pub fn lambda1(&self) -> f64 {
        self.eigs.lambda1()
    }

    /// Reference trace λ̃-expansion; α ∈ (0,1].
    pub fn oracle_trace(&self, alpha: f64) -> Result<Vec<f64>> {
        self.eigs
            .fractional_solve(&self.op.restrict(self.b_g.values()), alpha)
    }

    /// Full-space reference: the solution trace with its discrete-harmonic
    /// interior (every solver in this family produces harmonic fields).
    pub fn oracle_field(&self, alpha: f64, opts: &SolverOptions) -> Result<NodalField> {
        let trace = self.oracle_trace(alpha)?;
        self.op.harmonic_extension(&trace, opts)
    }

    pub fn errors_against_oracle(
        &self,
        y: &NodalField,
        alpha: f64,
        opts: &SolverOptions,
    ) -> Result<ErrorTriple> {
        let reference = self.oracle_field(alpha, opts)?;
        compute_errors(y, &reference, self.op.matrix_m_gamma(), &self.omega_mass)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    Quadrature,
    TimeStepping,
}

impl MethodKind {
    pub fn tag(self) -> &'static str {
        match self {
            MethodKind::Quadrature => "method1",
            MethodKind::TimeStepping => "method2",
        }
    }
}

/// One parameter point of a sweep: `param` is the quadrature half-width M or
/// the step count N depending on the method; σ only applies to time stepping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub method: MethodKind,
    pub alpha: f64,
    pub c0: f64,
    pub param: usize,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecord {
    pub method: String,
    pub alpha: f64,
    pub c0: f64,
    pub param: usize,
    pub sigma: Option<f64>,
    pub grid: &'static str,
    pub errors: ErrorTriple,
    pub reference: String,
    /// boundary-norm growth events during time stepping (0 for σ ≥ 0.5)
    pub norm_violations: usize,
}

pub struct SweepOutcome {
    pub records: Vec<ErrorRecord>,
    pub failures: Vec<(SweepPoint, Error)>,
    pub norm_violations: usize,
}

const SWEEP_PARAMS: [usize; 6] = [5, 10, 20, 40, 80, 160];

/// α ∈ {0.25, 0.5, 0.75} at c₀ = 5, both methods, M and N ∈ {5,...,160}.
pub fn table1_points() -> Vec<SweepPoint> {
    let mut pts = Vec::new();
    for method in [MethodKind::Quadrature, MethodKind::TimeStepping] {
        for alpha in [0.25, 0.5, 0.75] {
            for param in SWEEP_PARAMS {
                pts.push(SweepPoint {
                    method,
                    alpha,
                    c0: 5.0,
                    param,
                    sigma: 0.5,
                });
            }
        }
    }
    pts
}

/// α = 0.5 fixed, c₀ ∈ {1, 5, 25}, both methods.
pub fn table2_points() -> Vec<SweepPoint> {
    let mut pts = Vec::new();
    for method in [MethodKind::Quadrature, MethodKind::TimeStepping] {
        for c0 in [1.0, 5.0, 25.0] {
            for param in SWEEP_PARAMS {
                pts.push(SweepPoint {
                    method,
                    alpha: 0.5,
                    c0,
                    param,
                    sigma: 0.5,
                });
            }
        }
    }
    pts
}

fn run_point(ctx: &StudyContext, p: &SweepPoint, opts: &SolverOptions) -> Result<ErrorRecord> {
    let op = ctx.operator();
    let (y, violations) = match p.method {
        MethodKind::Quadrature => {
            let (y, _) = solve_method1(
                op.matrix_a(),
                op.matrix_m_gamma(),
                ctx.load(),
                p.alpha,
                p.param,
                opts,
            )?;
            (y, 0)
        }
        MethodKind::TimeStepping => {
            let params = TimeSchemeParams::new(p.param, p.sigma, default_delta(ctx.lambda1()))?;
            let mut state = initial_state(op, ctx.load(), p.alpha, params.delta, opts)?;
            for _ in 0..params.n_steps {
                step(op, &mut state, &params, p.alpha, opts)?;
            }
            let violations = state.monotonicity_violations();
            (state.into_field(), violations)
        }
    };
    let errors = ctx.errors_against_oracle(&y, p.alpha, opts)?;
    Ok(ErrorRecord {
        method: p.method.tag().to_string(),
        alpha: p.alpha,
        c0: p.c0,
        param: p.param,
        sigma: match p.method {
            MethodKind::TimeStepping => Some(p.sigma),
            MethodKind::Quadrature => None,
        },
        grid: ctx.grid().label(),
        errors,
        reference: format!("spectral[{}]", ctx.grid().label()),
        norm_violations: violations,
    })
}

/// Run every point on the given grid; a failed point is recorded and the
/// sweep continues. Records come back sorted by (method, α, c₀, param), so
/// the output is identical for any thread count.
pub fn run_sweep(points: &[SweepPoint], grid: GridKind, opts: &SolverOptions) -> SweepOutcome {
    let mut c0s: Vec<f64> = points.iter().map(|p| p.c0).collect();
    c0s.sort_by(f64::total_cmp);
    c0s.dedup();

    let mut contexts = Vec::new();
    let mut failures = Vec::new();
    for &c0 in &c0s {
        match StudyContext::new(grid, c0, opts) {
            Ok(ctx) => contexts.push(ctx),
            Err(e) => {
                for p in points.iter().filter(|p| p.c0 == c0) {
                    failures.push((*p, Error::Config(format!("context for c0={c0}: {e}"))));
                }
            }
        }
    }

    let results: Vec<(SweepPoint, Result<ErrorRecord>)> = points
        .par_iter()
        .filter(|p| contexts.iter().any(|c| c.c0() == p.c0))
        .map(|p| {
            let ctx = contexts
                .iter()
                .find(|c| c.c0() == p.c0)
                .expect("context existence checked above");
            (*p, run_point(ctx, p, opts))
        })
        .collect();

    let mut records = Vec::new();
    for (p, r) in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => failures.push((p, e)),
        }
    }
    records.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.alpha.total_cmp(&b.alpha))
            .then(a.c0.total_cmp(&b.c0))
            .then(a.param.cmp(&b.param))
    });
    let norm_violations = records.iter().map(|r| r.norm_violations).sum();
    SweepOutcome {
        records,
        failures,
        norm_violations,
    }
}
