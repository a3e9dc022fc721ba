//! Comparison functions `f = f₁ − f₂`, their constants, and numerical checks
//! of the one-step supersolution inequality.

pub mod constants;
pub mod functions;
pub mod verify;

use serde::{Deserialize, Serialize};

pub use constants::{build_constants, Candidates, ComparisonConstants, LedgerCheck};
pub use functions::{annulus_index, comparison, f1, f1_increment, f2, log_f2, log_f2_index, log_sum_exp, ComparisonValue};
pub use verify::{
    f1_step_bound_check, f2_average_lower_bound_check, verify_key_inequality, Branch, F2AverageReport,
    KeyInequalityReport, StepBoundReport, VerifyOptions,
};

/// Slack `η` subtracted from the averaged side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum EtaRule {
    /// `η = ε²`.
    #[default]
    EpsSquared,
    /// `η = ε^α`, used in the short-distance argument.
    EpsAlpha,
    Fixed { value: f64 },
}

impl EtaRule {
    pub fn value(&self, eps: f64, alpha: f64) -> f64 {
        match *self {
            EtaRule::EpsSquared => eps * eps,
            EtaRule::EpsAlpha => eps.powf(alpha),
            EtaRule::Fixed { value } => value,
        }
    }
}

/// Outcome of a statistical check. `Inconclusive` means the estimate is
/// within its error bar of the decision boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

impl Verdict {
    /// Classifies `value` against zero with half-width `band`.
    pub fn classify(value: f64, band: f64) -> Self {
        if value.is_nan() {
            Verdict::Inconclusive
        } else if value > band {
            Verdict::Holds
        } else if value < -band {
            Verdict::Fails
        } else {
            Verdict::Inconclusive
        }
    }

    pub fn holds(self) -> bool {
        self == Verdict::Holds
    }
}
