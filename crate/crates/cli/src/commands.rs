use std::path::Path;

use ellipsoid_lab::comparison::{build_constants, verify_key_inequality, VerifyOptions};
use ellipsoid_lab::counterexamples::{counterexample_2d, counterexample_3d};
use ellipsoid_lab::coupling::{
    min_trace_bound, mirror_coupling, mirror_objective_bound, optimal_coupling, thresholds, trace_objective,
    WeightMatrix,
};
use ellipsoid_lab::dpp::{holder_estimate, meeting_frequency, solve_dpp, task_rng, walk_estimate, GridSolution, Payoff};
use ellipsoid_lab::ellipsoid::config::FieldSpec;
use ellipsoid_lab::matcore::eig_sym;
use ellipsoid_lab::{CoefficientField, Domain, EllipticityClass, OrthoMatrix, SymMatrix};
use serde_json::{json, Value};

use crate::config::{Case, CommandName, Format, RunConfig};
use crate::report::to_json;
use crate::CliError;

fn usage(m: impl Into<String>) -> CliError {
    CliError::Usage(m.into())
}

fn to_value<S: serde::Serialize>(s: &S) -> Value {
    serde_json::to_value(s).expect("report types serialize")
}

fn field(cfg: &RunConfig) -> Result<CoefficientField<f64>, CliError> {
    let spec = cfg.field.clone().unwrap_or_else(|| FieldSpec::constant_identity(2));
    Ok(spec.build()?)
}

fn domain(cfg: &RunConfig, n: usize) -> Result<Domain<f64>, CliError> {
    let d = match &cfg.domain {
        Some(d) => d.clone(),
        None => Domain::ball(vec![0.0; n], 1.0)?,
    };
    if d.dim() != n {
        return Err(usage(format!("domain has dimension {} but the field has {n}", d.dim())));
    }
    Ok(d)
}

fn payoff(cfg: &RunConfig, n: usize) -> Result<Payoff<f64>, CliError> {
    let p = cfg.payoff.clone().unwrap_or_else(|| {
        let mut gradient = vec![0.0; n];
        gradient[0] = 1.0;
        Payoff::Affine { gradient, offset: 0.0 }
    });
    p.check_dim(n)?;
    Ok(p)
}

/// Half the smallest width of the domain's bounding box.
fn inradius(d: &Domain<f64>) -> f64 {
    let (lo, hi) = d.bounds();
    lo.iter().zip(&hi).map(|(a, b)| (b - a) / 2.0).fold(f64::INFINITY, f64::min)
}

fn point(v: &Option<Vec<f64>>, name: &str, n: usize) -> Result<Vec<f64>, CliError> {
    let p = v.clone().ok_or_else(|| usage(format!("`{name}` is required")))?;
    if p.len() != n {
        return Err(usage(format!("`{name}` has {} coordinates, expected {n}", p.len())));
    }
    Ok(p)
}

fn sym(rows: &Option<Vec<Vec<f64>>>, name: &str) -> Result<SymMatrix<f64>, CliError> {
    let rows = rows.as_ref().ok_or_else(|| usage(format!("`{name}` is required")))?;
    Ok(SymMatrix::from_rows(rows)?)
}

fn coupling(cfg: &RunConfig) -> Result<Value, CliError> {
    let s = &cfg.coupling;
    let a1 = sym(&s.a1, "a1")?;
    let a2 = sym(&s.a2, "a2")?;
    let n = a1.n();
    let alpha = s.alpha.unwrap_or(0.5);
    let direction = s.direction.clone().unwrap_or_else(|| {
        let mut e = vec![0.0; n];
        e[0] = 1.0;
        e
    });
    let w = WeightMatrix::along(&direction, alpha)?;
    let best = optimal_coupling(&a1, &a2, &w)?;
    let mirror = mirror_coupling(&w);
    let mirror_objective = trace_objective(&a1, &a2, &mirror, &w)?;
    let identity_objective = trace_objective(&a1, &a2, &OrthoMatrix::identity(n), &w)?;
    let e1 = eig_sym(&a1)?.values;
    let e2 = eig_sym(&a2)?.values;
    let lambda = e1.iter().chain(&e2).cloned().fold(f64::INFINITY, f64::min);
    let big_lambda = e1.iter().chain(&e2).cloned().fold(f64::NEG_INFINITY, f64::max);
    let cls = EllipticityClass::new(n, lambda, big_lambda)?;
    // for A₁ = A₂ the optimal objective is at most −4(1−α)λ
    let equal_bound = (a1 == a2).then(|| -4.0 * (1.0 - alpha) * lambda);
    Ok(json!({
        "q": to_value(&best.q),
        "objective": best.objective,
        "negative": best.negative,
        "mirror_objective": mirror_objective,
        "identity_objective": identity_objective,
        "lambda": lambda,
        "Lambda": big_lambda,
        "class_bound": min_trace_bound(&cls, alpha)?,
        "mirror_class_bound": mirror_objective_bound(&cls, alpha)?,
        "equal_coefficient_bound": equal_bound,
    }))
}

fn verify(cfg: &RunConfig) -> Result<Value, CliError> {
    let f = field(cfg)?;
    let n = f.dim();
    let s = &cfg.verify;
    let x = point(&s.x, "x", n)?;
    let z = point(&s.z, "z", n)?;
    let k = build_constants(f.class(), s.alpha, s.r, s.sup_u)?;
    let opts = VerifyOptions {
        integrator: s.integrator,
        mc_samples: s.mc_samples,
        eta: s.eta,
        sigmas: s.sigmas,
    };
    let mut rng = task_rng(cfg.seed, 0);
    let rep = verify_key_inequality(&x, &z, &f, None, s.eps, &k, &opts, &mut rng)?;
    Ok(json!({
        "constants": to_value(&k),
        "checks": to_value(&k.checks()),
        "constants_valid": k.is_valid(),
        "key_inequality": to_value(&rep),
    }))
}

fn solve(cfg: &RunConfig) -> Result<GridSolution<f64>, CliError> {
    let f = field(cfg)?;
    let n = f.dim();
    let d = domain(cfg, n)?;
    let p = payoff(cfg, n)?;
    Ok(solve_dpp(&f, &d, &p, &cfg.solve.options())?)
}

fn grid_summary(sol: &GridSolution<f64>) -> Value {
    json!({
        "sidecar": to_value(&sol.sidecar()),
        "interior_nodes": sol.interior_count(),
    })
}

fn not_converged(sol: &GridSolution<f64>) -> CliError {
    CliError::NonConvergence(format!(
        "solver stopped after {} sweeps with residual {:e} (tol {:e})",
        sol.iterations, sol.residual, sol.tol
    ))
}

fn walk(cfg: &RunConfig) -> Result<Value, CliError> {
    let f = field(cfg)?;
    let n = f.dim();
    let d = domain(cfg, n)?;
    let p = payoff(cfg, n)?;
    let s = &cfg.walk;
    let x0 = match &s.x0 {
        Some(_) => point(&s.x0, "x0", n)?,
        None => d.center(),
    };
    let summary = walk_estimate(&f, &d, &p, &x0, s.eps, s.walks, cfg.seed, s.step_cap)?;
    Ok(json!({ "x0": x0, "summary": to_value(&summary) }))
}

fn coupled_walk(cfg: &RunConfig) -> Result<Value, CliError> {
    let f = field(cfg)?;
    let n = f.dim();
    let d = domain(cfg, n)?;
    let s = &cfg.coupled_walk;
    let offset = inradius(&d) / 4.0;
    let shifted = |sign: f64| {
        let mut c = d.center();
        c[0] += sign * offset;
        c
    };
    let x0 = match &s.x0 {
        Some(_) => point(&s.x0, "x0", n)?,
        None => shifted(-1.0),
    };
    let z0 = match &s.z0 {
        Some(_) => point(&s.z0, "z0", n)?,
        None => shifted(1.0),
    };
    let freq = meeting_frequency(&f, &d, &x0, &z0, s.eps, s.coupling, s.runs, cfg.seed, s.step_cap)?;
    Ok(json!({
        "x0": x0,
        "z0": z0,
        "meeting_frequency": to_value(&freq),
    }))
}

fn counterexample(cfg: &RunConfig) -> Result<Value, CliError> {
    let s = &cfg.counterexample;
    let mut rng = task_rng(cfg.seed, 0);
    let rep = match s.case {
        Case::TwoD => counterexample_2d(s.samples, s.grid.unwrap_or(720), &mut rng)?,
        Case::ThreeD => counterexample_3d(s.samples, s.grid.unwrap_or(1000), &mut rng)?,
    };
    Ok(to_value(&rep))
}

fn emit(cfg: &RunConfig, result: Value, status: &str, to_file: bool) -> Result<(), CliError> {
    let envelope = json!({
        "command": to_value(&cfg.command),
        "status": status,
        "seed": cfg.seed,
        "version": { "cli": env!("CARGO_PKG_VERSION"), "core": ellipsoid_lab::VERSION },
        "config": to_value(cfg),
        "result": result,
    });
    let text = to_json(&envelope);
    match (&cfg.output, to_file) {
        (Some(path), true) => write_file(path, &text),
        _ => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

/// Runs one resolved configuration.
pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let command = cfg.command.ok_or_else(|| usage("no command"))?;
    let grid_command = matches!(command, CommandName::Solve | CommandName::Holder);
    if cfg.format == Format::Csv && !grid_command {
        return Err(usage("csv output is only available for `solve` and `holder`"));
    }
    // with csv the output path receives the grid and the report goes to stdout
    let report_to_file = cfg.format == Format::Json;
    let result = match command {
        CommandName::Coupling => coupling(cfg)?,
        CommandName::Thresholds => to_value(&thresholds(cfg.thresholds.n, cfg.thresholds.alpha)?),
        CommandName::Verify => verify(cfg)?,
        CommandName::Walk => walk(cfg)?,
        CommandName::CoupledWalk => coupled_walk(cfg)?,
        CommandName::Counterexample => counterexample(cfg)?,
        CommandName::Solve | CommandName::Holder => {
            let sol = solve(cfg)?;
            if cfg.format == Format::Csv {
                let path = cfg.output.as_ref().ok_or_else(|| usage("csv output needs --output"))?;
                sol.save(path)?;
            }
            let mut result = grid_summary(&sol);
            if !sol.converged {
                emit(cfg, result, "not_converged", report_to_file)?;
                return Err(not_converged(&sol));
            }
            if command == CommandName::Holder {
                let d = &sol.domain;
                let r_inner = cfg.holder.r_inner.unwrap_or_else(|| inradius(d) / 2.0);
                result["holder"] = to_value(&holder_estimate(&sol, cfg.holder.alpha, r_inner)?);
            }
            result
        }
    };
    emit(cfg, result, "ok", report_to_file)
}
