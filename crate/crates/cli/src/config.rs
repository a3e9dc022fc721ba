//! Run configuration: a TOML file with one section per command, overridden
//! by command-line flags.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use ellipsoid_lab::comparison::EtaRule;
use ellipsoid_lab::dpp::{CouplingStrategy, Payoff, SolveOptions};
use ellipsoid_lab::ellipsoid::config::FieldSpec;
use ellipsoid_lab::{Domain, Integrator};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
pub enum Case {
    #[default]
    #[serde(rename = "2d")]
    #[value(name = "2d")]
    TwoD,
    #[serde(rename = "3d")]
    #[value(name = "3d")]
    ThreeD,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    Coupling,
    Thresholds,
    Verify,
    Solve,
    Walk,
    CoupledWalk,
    Holder,
    Counterexample,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a1: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a2: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Separation direction; `e₁` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdsSection {
    pub n: usize,
    pub alpha: f64,
}

impl Default for ThresholdsSection {
    fn default() -> Self {
        ThresholdsSection { n: 2, alpha: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub alpha: f64,
    pub r: f64,
    pub sup_u: f64,
    pub eps: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<f64>>,
    pub mc_samples: usize,
    pub integrator: Integrator,
    pub eta: EtaRule,
    pub sigmas: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            alpha: 0.1,
            r: 1.0,
            sup_u: 1.0,
            eps: 1e-3,
            x: None,
            z: None,
            mc_samples: 100_000,
            integrator: Integrator::default(),
            eta: EtaRule::default(),
            sigmas: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSection {
    pub eps: f64,
    pub h: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub rule: Integrator,
}

impl Default for SolveSection {
    fn default() -> Self {
        let o = SolveOptions::new(0.125, 1.0 / 64.0);
        SolveSection {
            eps: o.eps,
            h: o.h,
            tol: o.tol,
            max_iters: o.max_iters,
            rule: o.rule,
        }
    }
}

impl SolveSection {
    pub fn options(&self) -> SolveOptions {
        SolveOptions {
            eps: self.eps,
            h: self.h,
            tol: self.tol,
            max_iters: self.max_iters,
            rule: self.rule,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    pub eps: f64,
    pub walks: u64,
    pub step_cap: u64,
}

impl Default for WalkSection {
    fn default() -> Self {
        WalkSection {
            x0: None,
            eps: 0.1,
            walks: 10_000,
            step_cap: ellipsoid_lab::dpp::DEFAULT_STEP_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoupledWalkSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z0: Option<Vec<f64>>,
    pub eps: f64,
    pub coupling: CouplingStrategy,
    pub runs: u64,
    pub step_cap: u64,
}

impl Default for CoupledWalkSection {
    fn default() -> Self {
        CoupledWalkSection {
            x0: None,
            z0: None,
            eps: 0.1,
            coupling: CouplingStrategy::Mirror,
            runs: 10_000,
            step_cap: ellipsoid_lab::dpp::DEFAULT_STEP_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HolderSection {
    pub alpha: f64,
    /// Radius of the inner region; half the domain's inradius when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_inner: Option<f64>,
}

impl Default for HolderSection {
    fn default() -> Self {
        HolderSection { alpha: 0.1, r_inner: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterexampleSection {
    pub case: Case,
    pub samples: usize,
    /// Rotation angles in 2D, Haar rotations in 3D.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
}

impl Default for CounterexampleSection {
    fn default() -> Self {
        CounterexampleSection {
            case: Case::TwoD,
            samples: 1_000_000,
            grid: None,
        }
    }
}

/// Everything a run depends on. Reports echo the resolved value, which
/// parses back into this type.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<CommandName>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<Domain<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payoff: Option<Payoff<f64>>,
    pub coupling: CouplingSection,
    pub thresholds: ThresholdsSection,
    pub verify: VerifySection,
    pub solve: SolveSection,
    pub walk: WalkSection,
    pub coupled_walk: CoupledWalkSection,
    pub holder: HolderSection,
    pub counterexample: CounterexampleSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

pub fn parse_vector(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad number `{}`: {e}", t.trim())))
        .collect()
}

pub fn parse_matrix(s: &str) -> Result<Vec<Vec<f64>>, String> {
    ellipsoid_lab::ellipsoid::config::parse_matrix_rows(s).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_parse() {
        let cfg = RunConfig::from_toml(
            r#"
seed = 9
[field]
kind = "checkerboard"
n = 2
lambda = 1.0
Lambda = 2.0
cell = 0.25
[domain]
kind = "ball"
center = [0.0, 0.0]
radius = 1.0
[payoff]
kind = "affine"
gradient = [1.0, 2.0]
offset = 0.5
[solve]
eps = 0.25
h = 0.0625
[coupled_walk]
coupling = { strategy = "optimal", alpha = 0.5 }
"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.solve.eps, 0.25);
        assert_eq!(cfg.solve.tol, 1e-7);
        assert_eq!(cfg.coupled_walk.coupling, CouplingStrategy::Optimal { alpha: 0.5 });
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("sed = 3\n").is_err());
        assert!(RunConfig::from_toml("[solve]\nepsilon = 0.1\n").is_err());
        assert!(RunConfig::from_toml("[payoff]\nkind = \"affine\"\ngradient = [1.0]\noffset = 0.0\nslope = 1\n").is_err());
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.field = Some(FieldSpec::constant_identity(3));
        cfg.verify.x = Some(vec![0.1, 0.0, 0.0]);
        let json = serde_json::to_value(&cfg).unwrap();
        let back: RunConfig = serde_json::from_value(json.clone()).unwrap();
        assert_eq!(serde_json::to_value(&back).unwrap(), json);
        let text = toml::to_string(&cfg).unwrap();
        RunConfig::from_toml(&text).unwrap();
    }

    #[test]
    fn vectors_and_matrices() {
        assert_eq!(parse_vector("1, -2.5,3").unwrap(), vec![1.0, -2.5, 3.0]);
        assert!(parse_vector("1,x").is_err());
        assert_eq!(parse_matrix("1,0;0,1").unwrap(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    }
}
