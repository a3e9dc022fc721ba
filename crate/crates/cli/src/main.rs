mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ellipsoid_lab::dpp::CouplingStrategy;
use ellipsoid_lab::ellipsoid::config::{FieldKindSpec, FieldSpec};
use ellipsoid_lab::Domain;

use config::{parse_matrix, parse_vector, Case, CommandName, Format, RunConfig};

// aliases keep clap from reading `Vec` as a repeated argument
type Point = Vec<f64>;
type Rows = Vec<Vec<f64>>;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or parameters; exit status 1.
    Usage(String),
    /// A solver stopped before converging; exit status 2.
    NonConvergence(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::NonConvergence(m) => f.write_str(m),
        }
    }
}

impl From<ellipsoid_lab::Error> for CliError {
    fn from(e: ellipsoid_lab::Error) -> Self {
        match e {
            ellipsoid_lab::Error::NoConvergence { .. } => CliError::NonConvergence(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ellipsoid-lab", version, about = "Couplings, DPP solves and comparison checks for ellipsoid processes")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Report path (JSON), or grid path for `solve --format csv`.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, env = "ELLIPSOID_LAB_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Default)]
struct FieldArgs {
    #[arg(long, value_enum)]
    field_kind: Option<FieldKind>,
    /// Dimension.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long = "big-lambda")]
    big_lambda: Option<f64>,
    /// Constant coefficient, rows separated by `;`.
    #[arg(long, value_parser = parse_matrix)]
    matrix: Option<Rows>,
    /// Checkerboard cell size.
    #[arg(long)]
    cell: Option<f64>,
    /// Ball domain radius.
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long, value_parser = parse_vector)]
    center: Option<Point>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum FieldKind {
    Constant,
    Checkerboard,
    Rotating,
}

#[derive(Debug, Args, Default)]
struct SolveArgs {
    #[arg(long)]
    eps: Option<f64>,
    /// Lattice spacing.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum Strategy {
    Optimal,
    Mirror,
    Identity,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal orthogonal coupling between two coefficient matrices.
    Coupling {
        #[arg(long, value_parser = parse_matrix)]
        a1: Option<Rows>,
        #[arg(long, value_parser = parse_matrix)]
        a2: Option<Rows>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, value_parser = parse_vector)]
        direction: Option<Point>,
    },
    /// Distortion thresholds for a dimension and Hölder exponent.
    Thresholds {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Comparison constants and the one-step key inequality at a pair.
    Verify {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        sup_u: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, value_parser = parse_vector)]
        x: Option<Point>,
        #[arg(long, value_parser = parse_vector)]
        z: Option<Point>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Grid fixed point of the mean value DPP.
    Solve {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Monte Carlo estimate of the DPP value from exit positions.
    Walk {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long, value_parser = parse_vector)]
        x0: Option<Point>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        walks: Option<u64>,
        #[arg(long)]
        step_cap: Option<u64>,
    },
    /// Meeting frequency of two coupled walks.
    CoupledWalk {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long, value_parser = parse_vector)]
        x0: Option<Point>,
        #[arg(long, value_parser = parse_vector)]
        z0: Option<Point>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, value_enum)]
        strategy: Option<Strategy>,
        /// Exponent for the optimal strategy.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        runs: Option<u64>,
        #[arg(long)]
        step_cap: Option<u64>,
    },
    /// Empirical Hölder quotient of a grid solution.
    Holder {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        solve: SolveArgs,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        r_inner: Option<f64>,
    },
    /// Large-distortion counterexamples to the projection inequality.
    Counterexample {
        #[arg(long, value_enum)]
        case: Option<Case>,
        #[arg(long)]
        samples: Option<usize>,
        /// Rotation angles (2d) or Haar rotations (3d).
        #[arg(long)]
        grid: Option<usize>,
    },
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

fn apply_field(cfg: &mut RunConfig, a: FieldArgs) {
    let mut spec = cfg
        .field
        .take()
        .unwrap_or_else(|| FieldSpec::constant_identity(a.n.unwrap_or(2)));
    if let Some(n) = a.n {
        if n != spec.n {
            spec = FieldSpec::constant_identity(n);
        }
    }
    if let Some(k) = a.field_kind {
        spec.kind = match k {
            FieldKind::Constant => FieldKindSpec::Constant,
            FieldKind::Checkerboard => FieldKindSpec::Checkerboard,
            FieldKind::Rotating => FieldKindSpec::Rotating,
        };
    }
    set(&mut spec.lambda, a.lambda);
    set(&mut spec.big_lambda, a.big_lambda);
    set_opt(&mut spec.matrix, a.matrix);
    set_opt(&mut spec.cell, a.cell);
    let n = spec.n;
    cfg.field = Some(spec);
    if a.radius.is_some() || a.center.is_some() {
        let (center, radius) = match cfg.domain.take() {
            Some(Domain::Ball { center, radius }) => (center, radius),
            _ => (vec![0.0; n], 1.0),
        };
        cfg.domain = Some(Domain::Ball {
            center: a.center.unwrap_or(center),
            radius: a.radius.unwrap_or(radius),
        });
    }
}

fn apply_solve(cfg: &mut RunConfig, a: SolveArgs) {
    set(&mut cfg.solve.eps, a.eps);
    set(&mut cfg.solve.h, a.h);
    set(&mut cfg.solve.tol, a.tol);
    set(&mut cfg.solve.max_iters, a.max_iters);
}

/// Loads the file, then lays the flags over it.
fn resolve(cli: Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    set_opt(&mut cfg.output, cli.output);
    set(&mut cfg.format, cli.format);
    set_opt(&mut cfg.threads, cli.threads);
    let name = match cli.command {
        Command::Coupling { a1, a2, alpha, direction } => {
            let s = &mut cfg.coupling;
            set_opt(&mut s.a1, a1);
            set_opt(&mut s.a2, a2);
            set_opt(&mut s.alpha, alpha);
            set_opt(&mut s.direction, direction);
            CommandName::Coupling
        }
        Command::Thresholds { n, alpha } => {
            set(&mut cfg.thresholds.n, n);
            set(&mut cfg.thresholds.alpha, alpha);
            CommandName::Thresholds
        }
        Command::Verify { field, alpha, r, sup_u, eps, x, z, samples } => {
            apply_field(&mut cfg, field);
            let s = &mut cfg.verify;
            set(&mut s.alpha, alpha);
            set(&mut s.r, r);
            set(&mut s.sup_u, sup_u);
            set(&mut s.eps, eps);
            set_opt(&mut s.x, x);
            set_opt(&mut s.z, z);
            set(&mut s.mc_samples, samples);
            CommandName::Verify
        }
        Command::Solve { field, solve } => {
            apply_field(&mut cfg, field);
            apply_solve(&mut cfg, solve);
            CommandName::Solve
        }
        Command::Walk { field, x0, eps, walks, step_cap } => {
            apply_field(&mut cfg, field);
            let s = &mut cfg.walk;
            set_opt(&mut s.x0, x0);
            set(&mut s.eps, eps);
            set(&mut s.walks, walks);
            set(&mut s.step_cap, step_cap);
            CommandName::Walk
        }
        Command::CoupledWalk { field, x0, z0, eps, strategy, alpha, runs, step_cap } => {
            apply_field(&mut cfg, field);
            let s = &mut cfg.coupled_walk;
            set_opt(&mut s.x0, x0);
            set_opt(&mut s.z0, z0);
            set(&mut s.eps, eps);
            set(&mut s.runs, runs);
            set(&mut s.step_cap, step_cap);
            let current_alpha = match s.coupling {
                CouplingStrategy::Optimal { alpha } => alpha,
                _ => 0.5,
            };
            match strategy {
                Some(Strategy::Optimal) => {
                    s.coupling = CouplingStrategy::Optimal {
                        alpha: alpha.unwrap_or(current_alpha),
                    }
                }
                Some(Strategy::Mirror) => s.coupling = CouplingStrategy::Mirror,
                Some(Strategy::Identity) => s.coupling = CouplingStrategy::Identity,
                None => {
                    if let (CouplingStrategy::Optimal { .. }, Some(a)) = (s.coupling, alpha) {
                        s.coupling = CouplingStrategy::Optimal { alpha: a };
                    }
                }
            }
            CommandName::CoupledWalk
        }
        Command::Holder { field, solve, alpha, r_inner } => {
            apply_field(&mut cfg, field);
            apply_solve(&mut cfg, solve);
            set(&mut cfg.holder.alpha, alpha);
            set_opt(&mut cfg.holder.r_inner, r_inner);
            CommandName::Holder
        }
        Command::Counterexample { case, samples, grid } => {
            let s = &mut cfg.counterexample;
            set(&mut s.case, case);
            set(&mut s.samples, samples);
            set_opt(&mut s.grid, grid);
            CommandName::Counterexample
        }
    };
    if let Some(file_cmd) = cfg.command {
        if file_cmd != name {
            return Err(CliError::Usage(format!(
                "config is for `{}` but `{}` was requested",
                serde_json::to_value(file_cmd).unwrap().as_str().unwrap_or("?"),
                serde_json::to_value(name).unwrap().as_str().unwrap_or("?"),
            )));
        }
    }
    cfg.command = Some(name);
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = resolve(cli).and_then(|cfg| {
        let threads = cfg.threads.unwrap_or(0);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
        pool.install(|| commands::run(&cfg))
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::NonConvergence(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
