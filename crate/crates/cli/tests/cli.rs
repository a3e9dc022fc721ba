use assert_cmd::Command;
use serde_json::Value;

fn bin() -> Command {
    Command::cargo_bin("ellipsoid-lab").unwrap()
}

fn run_json(args: &[&str]) -> Value {
    let out = bin().args(args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn thresholds_match_closed_forms() {
    let v = run_json(&["thresholds", "--n", "2", "--alpha", "0.1"]);
    let r = &v["result"];
    let (n, a) = (2.0_f64, 0.1_f64);
    let optimal = (n * (1.0 - a).powf(1.0 / n) + 1.0 - a) / (n - 1.0);
    let diagonal = (1.0 + 2.0 * ((1.0 - a) / (n - 1.0)).sqrt()).powi(2);
    assert!((f(&r["optimal"]) - optimal).abs() < 1e-14);
    assert!((f(&r["limit"]) - 3.0).abs() < 1e-14);
    assert!((f(&r["mirror"]) - 3.0 / 1.2).abs() < 1e-14);
    assert!((f(&r["diagonal"]) - diagonal).abs() < 1e-14);
    assert_eq!(v["seed"], 0);
    assert_eq!(v["version"]["core"], "0.1.0");
}

#[test]
fn identity_pair_objective_bound() {
    let v = run_json(&["coupling", "--a1", "1,0;0,1", "--a2", "1,0;0,1", "--alpha", "0.5"]);
    let obj = f(&v["result"]["objective"]);
    assert!(obj <= -2.0 + 1e-12, "{obj}");
    assert_eq!(v["result"]["negative"], true);
}

#[test]
fn validation_errors_exit_one() {
    bin().args(["thresholds", "--bogus"]).assert().code(1);
    bin().args(["thresholds", "--n", "1"]).assert().code(1);
    bin().args(["coupling", "--a1", "1,0;0,1"]).assert().code(1);
    bin().args(["walk", "--format", "csv"]).assert().code(1);
    bin().arg("--help").assert().code(0);
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[solve]\nepsilon = 0.1\n").unwrap();
    bin().args(["solve", "--config", cfg.to_str().unwrap()]).assert().code(1);
    std::fs::write(&cfg, "command = \"walk\"\n").unwrap();
    bin().args(["solve", "--config", cfg.to_str().unwrap()]).assert().code(1);
}

#[test]
fn non_convergence_exits_two_with_partial_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[payoff]\nkind = \"quadratic\"\nhessian = [[2.0, 0.0], [0.0, 0.0]]\ngradient = [0.0, 0.0]\noffset = 0.0\n",
    )
    .unwrap();
    let grid = dir.path().join("u.csv");
    let out = bin()
        .args(["solve", "--config", cfg.to_str().unwrap(), "--eps", "0.25", "--h", "0.0625", "--max-iters", "2"])
        .args(["--format", "csv", "--output", grid.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["status"], "not_converged");
    assert_eq!(v["result"]["sidecar"]["converged"], false);
    let csv = std::fs::read_to_string(&grid).unwrap();
    assert!(csv.starts_with("x1,x2,u\n"));
    assert!(dir.path().join("u.csv.json").exists());
}

#[test]
fn solve_writes_grid_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("affine.csv");
    let out = bin()
        .args(["solve", "--eps", "0.25", "--h", "0.0625", "--format", "csv", "-o", grid.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    let side: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("affine.csv.json")).unwrap()).unwrap();
    assert_eq!(side["converged"], true);
    let mut rdr = std::fs::read_to_string(&grid).unwrap();
    rdr.truncate(rdr.len().min(2000));
    // u = x₁ for the default affine payoff
    for line in rdr.lines().skip(1).filter(|l| l.split(',').count() == 3) {
        let vals: Vec<f64> = line.split(',').map(|t| t.parse().unwrap()).collect();
        assert!((vals[2] - vals[0]).abs() < 1e-9, "{line}");
    }
}

#[test]
fn seeded_runs_repeat() {
    let args = ["coupled-walk", "--eps", "0.2", "--runs", "300", "--seed", "11"];
    let a = bin().args(args).output().unwrap();
    let b = bin().args(args).env("ELLIPSOID_LAB_THREADS", "1").output().unwrap();
    assert!(a.status.success() && b.status.success());
    let strip = |o: &[u8]| {
        let mut v: Value = serde_json::from_slice(o).unwrap();
        v["config"].as_object_mut().unwrap().remove("threads");
        v
    };
    assert_eq!(strip(&a.stdout), strip(&b.stdout));
    let c = run_json(&["coupled-walk", "--eps", "0.2", "--runs", "300", "--seed", "12"]);
    assert_ne!(c["result"], strip(&a.stdout)["result"]);
}

#[test]
fn config_echo_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let first = run_json(&["walk", "--eps", "0.25", "--walks", "200", "--seed", "5", "--n", "3", "--radius", "0.5"]);
    let cfg = dir.path().join("echo.toml");
    std::fs::write(&cfg, toml::to_string(&first["config"]).unwrap()).unwrap();
    let second = run_json(&["walk", "--config", cfg.to_str().unwrap()]);
    assert_eq!(first, second);
}

#[test]
fn report_goes_to_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    let out = bin().args(["thresholds", "-o", path.to_str().unwrap()]).output().unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["command"], "thresholds");
}

#[test]
fn planar_counterexample_report() {
    let v = run_json(&["counterexample", "--case", "2d", "--samples", "1000000", "--grid", "24", "--seed", "7"]);
    let r = &v["result"];
    assert_eq!(r["all_violated"], true);
    assert_eq!(r["records"].as_array().unwrap().len(), 48);
    assert!(f(&r["max_parallel"]) <= 1.21 + 0.05);
    assert!(f(&r["min_orthogonal"]) >= 6.0);
    assert!((f(&r["orthogonal_floor"]) - 6.2561).abs() < 1e-3);
}
