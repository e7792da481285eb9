//! Command-line surface: mesh generation, eigenvalue queries, single solves,
//! convergence sweeps and solution comparison.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::assembly::{assemble_boundary_load, Coefficients, NodalField};
use crate::config::{BoundaryData, MeshSource, RunConfig, SolveMethod};
use crate::error::{Error, Result};
use crate::linalg::SolverOptions;
use crate::mesh::{generate_quarter_disk, Mesh};
use crate::pseudo_parabolic::{solve_method2, TimeSchemeParams};
use crate::quadrature::{build_rule, solve_with_rule};
use crate::report::{csv_line, write_csv, CSV_HEADER};
use crate::steklov::{default_delta, SteklovOperator, DENSE_ORACLE_LIMIT};
use crate::study::{
    compute_errors, field_extrema, mass_omega, run_sweep, solve_dirichlet, solve_neumann,
    table1_points, table2_points, ErrorRecord, ErrorTriple, GridKind,
};
use crate::vtk::{read_vtk, write_vtk};

pub const THREADS_ENV: &str = "STEKLOV_FRAC_THREADS";

#[derive(Parser)]
#[command(
    name = "steklov-frac",
    version,
    about = "Finite-element solvers for S^alpha u = g with a Dirichlet-to-Neumann operator S"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate, refine or convert a triangle mesh
    Mesh(MeshArgs),
    /// Print the smallest Steklov eigenvalue (optionally the full spectrum)
    Eig(EigArgs),
    /// Solve one problem and write the solution field
    Solve(SolveArgs),
    /// Run a convergence sweep and write the error table
    Converge(ConvergeArgs),
    /// Compare two stored solution fields
    Compare(CompareArgs),
}

#[derive(Args)]
struct MeshArgs {
    /// number of quarter-disk rings to generate
    #[arg(long, conflicts_with = "import")]
    rings: Option<usize>,
    /// read an existing mesh file instead of generating
    #[arg(long)]
    import: Option<PathBuf>,
    /// uniform refinement passes applied after generation/import
    #[arg(long, default_value_t = 0)]
    refine: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EigArgs {
    #[arg(long, default_value_t = 5.0)]
    c0: f64,
    #[arg(long, default_value_t = 1.0)]
    k: f64,
    /// coarse, medium or fine
    #[arg(long, default_value = "medium")]
    grid: String,
    /// generate a fresh fan instead of a preset grid
    #[arg(long)]
    rings: Option<usize>,
    /// print the whole spectrum, not just the smallest eigenvalue
    #[arg(long)]
    full: bool,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
}

#[derive(Args)]
struct SolveArgs {
    /// key=value file applied before any flags
    #[arg(long)]
    config: Option<PathBuf>,
    /// method1, method2, spectral, dirichlet or neumann
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    c0: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    /// constant boundary datum
    #[arg(long)]
    g: Option<f64>,
    /// per-boundary-node datum file (one value per line)
    #[arg(long)]
    g_file: Option<PathBuf>,
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    rings: Option<usize>,
    #[arg(long)]
    mesh_file: Option<PathBuf>,
    /// quadrature half-width
    #[arg(long = "M")]
    m: Option<usize>,
    /// quadrature step override
    #[arg(long)]
    eta: Option<f64>,
    /// time steps
    #[arg(long = "N")]
    n_steps: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    /// spectral shift override
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    out_vtk: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergeArgs {
    /// 1: alpha sweep at c0=5; 2: c0 sweep at alpha=0.5
    #[arg(long)]
    table: u8,
    #[arg(long, default_value = "coarse")]
    grid: String,
    /// output CSV path (default table<n>.csv)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
}

#[derive(Args)]
struct CompareArgs {
    first: PathBuf,
    second: PathBuf,
    /// grid the stored fields live on
    #[arg(long, default_value = "coarse")]
    grid: String,
    #[arg(long, default_value_t = 5.0)]
    c0: f64,
    /// label carried into the output record
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
}

/// Parse argv and execute; returns the process exit code.
pub fn dispatch() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // clap exits 2 on usage errors and 0 for --help/--version
        Err(e) => e.exit(),
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return 1;
    }
    let outcome = match cli.command {
        Command::Mesh(args) => run_mesh(args),
        Command::Eig(args) => run_eig(args),
        Command::Solve(args) => run_solve(args),
        Command::Converge(args) => run_converge(args),
        Command::Compare(args) => run_compare(args),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw.parse().map_err(|_| {
        Error::Config(format!("{THREADS_ENV} must be an integer >= 1, got '{raw}'"))
    })?;
    if threads < 1 {
        return Err(Error::Config(format!(
            "{THREADS_ENV} must be an integer >= 1, got {threads}"
        )));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn run_mesh(args: MeshArgs) -> Result<()> {
    let mut mesh = match (&args.rings, &args.import) {
        (Some(n), None) => generate_quarter_disk(*n)?,
        (None, Some(path)) => Mesh::import(path)?,
        _ => {
            return Err(Error::Config(
                "mesh needs exactly one of --rings or --import".into(),
            ))
        }
    };
    for _ in 0..args.refine {
        mesh = mesh.refine_uniform();
    }
    mesh.export(&args.out)?;
    println!(
        "vertices={} triangles={} boundary_edges={} -> {}",
        mesh.num_vertices(),
        mesh.num_triangles(),
        mesh.boundary_edges().len(),
        args.out.display()
    );
    Ok(())
}

fn build_operator(mesh: Arc<Mesh>, k: f64, c0: f64) -> Result<SteklovOperator> {
    SteklovOperator::from_mesh(&mesh, &Coefficients::constant(k, c0))
}

fn resolve_mesh(source: &MeshSource) -> Result<Arc<Mesh>> {
    Ok(Arc::new(match source {
        MeshSource::Grid(g) => g.build(),
        MeshSource::Rings(n) => generate_quarter_disk(*n)?,
        MeshSource::File(path) => Mesh::import(path)?,
    }))
}

fn run_eig(args: EigArgs) -> Result<()> {
    let mesh = match args.rings {
        Some(n) => Arc::new(generate_quarter_disk(n)?),
        None => Arc::new(GridKind::parse(&args.grid)?.build()),
    };
    let op = build_operator(mesh, args.k, args.c0)?;
    let opts = SolverOptions {
        tol: args.tol,
        max_iter: None,
    };
    if op.num_boundary() <= DENSE_ORACLE_LIMIT {
        let eigs = op.steklov_eigs(&opts)?;
        println!("lambda1 = {:.6}", eigs.lambda1());
        if args.full {
            for (j, lam) in eigs.eigenvalues().iter().enumerate() {
                println!("lambda[{j}] = {lam:.6}");
            }
        }
    } else {
        if args.full {
            return Err(Error::InvalidParameter(format!(
                "full spectrum needs at most {DENSE_ORACLE_LIMIT} boundary nodes, \
                 this mesh has {}",
                op.num_boundary()
            )));
        }
        let lam = op.smallest_eigenvalue_inverse_iteration(None, 1e-10, 200, &opts)?;
        println!("lambda1 = {lam:.6}");
    }
    Ok(())
}

fn boundary_load(op: &SteklovOperator, g: &BoundaryData) -> Result<NodalField> {
    match g {
        BoundaryData::Constant(v) => {
            let v = *v;
            Ok(assemble_boundary_load(op.mesh(), &move |_, _| v))
        }
        BoundaryData::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let mut vals = Vec::new();
            for (idx, line) in text.lines().enumerate() {
                let t = line.trim();
                if t.is_empty() || t.starts_with('#') {
                    continue;
                }
                vals.push(t.parse::<f64>().map_err(|_| {
                    Error::parse(idx + 1, format!("cannot parse boundary value '{t}'"))
                })?);
            }
            if vals.len() != op.num_boundary() {
                return Err(Error::Dimensions(format!(
                    "{} boundary values for {} boundary nodes",
                    vals.len(),
                    op.num_boundary()
                )));
            }
            let b = op.boundary_mass_sparse().mul_vec(&vals);
            NodalField::new(op.mesh().clone(), op.scatter(&b))
        }
    }
}

fn shift_for(op: &SteklovOperator, config: &RunConfig, opts: &SolverOptions) -> Result<f64> {
    if let Some(delta) = config.delta {
        return Ok(delta);
    }
    let lambda1 = if op.num_boundary() <= DENSE_ORACLE_LIMIT {
        op.steklov_eigs(opts)?.lambda1()
    } else {
        op.smallest_eigenvalue_inverse_iteration(None, 1e-10, 200, opts)?
    };
    Ok(default_delta(lambda1))
}

fn run_solve(args: SolveArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let overrides: Vec<(&str, Option<String>)> = vec![
        ("method", args.method.clone()),
        ("alpha", args.alpha.map(|v| v.to_string())),
        ("c0", args.c0.map(|v| v.to_string())),
        ("k", args.k.map(|v| v.to_string())),
        ("g", args.g.map(|v| v.to_string())),
        ("g_file", args.g_file.map(|p| p.display().to_string())),
        ("grid", args.grid.clone()),
        ("rings", args.rings.map(|v| v.to_string())),
        ("mesh_file", args.mesh_file.map(|p| p.display().to_string())),
        ("M", args.m.map(|v| v.to_string())),
        ("eta", args.eta.map(|v| v.to_string())),
        ("N", args.n_steps.map(|v| v.to_string())),
        ("sigma", args.sigma.map(|v| v.to_string())),
        ("delta", args.delta.map(|v| v.to_string())),
        ("tol", args.tol.map(|v| v.to_string())),
        ("max_iter", args.max_iter.map(|v| v.to_string())),
        ("out_vtk", args.out_vtk.map(|p| p.display().to_string())),
    ];
    for (key, value) in overrides {
        if let Some(value) = value {
            config.apply_override(key, &value)?;
        }
    }
    for warning in config.validate()? {
        eprintln!("warning: {warning}");
    }

    let start = Instant::now();
    let mesh = resolve_mesh(&config.mesh)?;
    let op = build_operator(mesh.clone(), config.k, config.c0)?;
    let b_g = boundary_load(&op, &config.g)?;
    let opts = SolverOptions {
        tol: config.tol,
        max_iter: config.max_iter,
    };

    let (field, report) = match config.method {
        SolveMethod::Method1 => {
            let rule = build_rule(config.m, config.alpha, config.eta)?;
            let (y, rep) = solve_with_rule(op.matrix_a(), op.matrix_m_gamma(), &b_g, &rule, &opts)?;
            (y, Some(rep))
        }
        SolveMethod::Method2 => {
            let delta = shift_for(&op, &config, &opts)?;
            let params = TimeSchemeParams::new(config.n_steps, config.sigma, delta)?;
            let (y, rep) = solve_method2(&op, &b_g, config.alpha, &params, &opts)?;
            (y, Some(rep))
        }
        SolveMethod::Spectral => {
            let eigs = op.steklov_eigs(&opts)?;
            let trace = eigs.fractional_solve(&op.restrict(b_g.values()), config.alpha)?;
            (op.harmonic_extension(&trace, &opts)?, None)
        }
        SolveMethod::Dirichlet => (solve_dirichlet(&op, &b_g, &opts)?, None),
        SolveMethod::Neumann => (solve_neumann(&op, &b_g, &opts)?, None),
    };

    let out_vtk = config
        .out_vtk
        .clone()
        .unwrap_or_else(|| PathBuf::from("solution.vtk"));
    write_vtk(&mesh, &[("solution", &field)], &out_vtk)?;

    let (min, max) = field_extrema(&field);
    println!(
        "method={} vertices={} min={:.6} max={:.6}",
        config.method.label(),
        mesh.num_vertices(),
        min,
        max
    );
    if let Some(rep) = &report {
        println!(
            "iterations={} residual={:.3e}",
            rep.iterations, rep.relative_residual
        );
    }
    println!(
        "wall={:.3}s vtk={}",
        start.elapsed().as_secs_f64(),
        out_vtk.display()
    );
    Ok(())
}

fn run_converge(args: ConvergeArgs) -> Result<()> {
    let points = match args.table {
        1 => table1_points(),
        2 => table2_points(),
        other => {
            return Err(Error::Config(format!(
                "unknown table {other} (expected 1 or 2)"
            )))
        }
    };
    let grid = GridKind::parse(&args.grid)?;
    let opts = SolverOptions {
        tol: args.tol,
        max_iter: None,
    };
    let out = args
        .out
        .unwrap_or_else(|| PathBuf::from(format!("table{}.csv", args.table)));
    let outcome = run_sweep(&points, grid, &opts);
    if !outcome.records.is_empty() {
        write_csv(&outcome.records, &out)?;
    }
    println!(
        "records={} failures={} norm_violations={} csv={}",
        outcome.records.len(),
        outcome.failures.len(),
        outcome.norm_violations,
        out.display()
    );
    for (point, error) in &outcome.failures {
        eprintln!("failed: {point:?}: {error}");
    }
    if !outcome.failures.is_empty() {
        return Err(Error::Numerical(format!(
            "{} of {} sweep points failed",
            outcome.failures.len(),
            points.len()
        )));
    }
    Ok(())
}

fn stored_field(path: &Path, mesh: &Arc<Mesh>) -> Result<NodalField> {
    let data = read_vtk(path)?;
    if data.points.len() != mesh.num_vertices() {
        return Err(Error::Dimensions(format!(
            "{}: {} points but the requested grid has {} vertices",
            path.display(),
            data.points.len(),
            mesh.num_vertices()
        )));
    }
    let (_, values) = data.scalars.into_iter().next().ok_or_else(|| {
        Error::InvalidParameter(format!("{}: no scalar field stored", path.display()))
    })?;
    NodalField::new(mesh.clone(), values)
}

fn run_compare(args: CompareArgs) -> Result<()> {
    let grid = GridKind::parse(&args.grid)?;
    let mesh = Arc::new(grid.build());
    let first = stored_field(&args.first, &mesh)?;
    let second = stored_field(&args.second, &mesh)?;
    let m_gamma = crate::assembly::assemble_boundary_mass(&mesh);
    let omega = mass_omega(&mesh);
    let errors: ErrorTriple = compute_errors(&first, &second, &m_gamma, &omega)?;
    let record = ErrorRecord {
        method: "compare".into(),
        alpha: args.alpha,
        c0: args.c0,
        param: 0,
        sigma: None,
        grid: grid.label(),
        errors,
        reference: args.second.display().to_string(),
        norm_violations: 0,
    };
    println!("{CSV_HEADER}");
    println!("{}", csv_line(&record));
    Ok(())
}
