//! The constants ledger `(α, C, C̃, N, r, sup|u|, τ, γ)`.

use serde::{Deserialize, Serialize};

use crate::coupling::{tau, thresholds};
use crate::error::{Error, Result};
use crate::matcore::EllipticityClass;
use crate::scalar::Real;

/// Inflation applied to the largest lower bound on `C`.
pub const SAFETY_FACTOR: f64 = 1.01;
/// Radius ratio `ϱ` used for the medium-distance constant.
pub const RHO: f64 = 1.0 / 300.0;

/// Lower bounds on `C` and `N` from which the ledger was assembled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidates {
    /// `2 sup|u| / r^α`.
    pub c1: f64,
    /// `(16 C̃ Λ r^{2−α} + 4 r^{2−α} + 1) / τ`.
    pub c2: f64,
    /// `12 C̃ r`.
    pub c3: f64,
    /// Positive root of `γ C² − 3 Λ^{α/2} C − 2` for the medium-distance `γ`.
    pub c4_medium: f64,
    /// Same root for the short-distance `γ`.
    pub c4_short: f64,
    /// `4 √(Λ/λ)`.
    pub n1: f64,
    /// `2^{7/2} Λ √(Λ/λ) C`.
    pub n2: f64,
    /// `4 √3`.
    pub n1_uniform: f64,
    /// `√(2⁷·3) Λ C`.
    pub n2_uniform: f64,
}

/// One named inequality of the ledger, `lhs > rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonConstants {
    pub n: usize,
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    pub alpha: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "C_tilde")]
    pub c_tilde: f64,
    #[serde(rename = "N")]
    pub n_annuli: u64,
    pub r: f64,
    pub sup_u: f64,
    pub tau: f64,
    pub gamma_short: f64,
    pub gamma_medium: f64,
    pub candidates: Candidates,
}

fn quadratic_root(gamma: f64, b: f64) -> f64 {
    (b + (b * b + 8.0 * gamma).sqrt()) / (2.0 * gamma)
}

/// Smallest integer strictly above `x`.
fn int_above(x: f64) -> u64 {
    x.floor() as u64 + 1
}

/// Smallest integer at or above `x`.
fn int_at_least(x: f64) -> u64 {
    x.ceil() as u64
}

/// Builds the minimal ledger: `C` is the largest lower bound times
/// [`SAFETY_FACTOR`], then `N` is the smallest integer meeting every
/// annulus-count condition for that `C`.
pub fn build_constants<T: Real>(cls: &EllipticityClass<T>, alpha: f64, r: f64, sup_u: f64) -> Result<ComparisonConstants> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::param("r", "must be positive"));
    }
    if !(sup_u > 0.0 && sup_u.is_finite()) {
        return Err(Error::param("sup_u", "must be positive"));
    }
    let n = cls.n;
    let th = thresholds(n, alpha)?;
    let (lambda, big_lambda) = (cls.lambda.as_f64(), cls.big_lambda.as_f64());
    let tau = tau(cls, T::lit(alpha))?.as_f64();
    if tau <= 0.0 {
        return Err(Error::DistortionTooLarge {
            distortion: big_lambda / lambda,
            threshold: th.optimal,
        });
    }
    let nf = n as f64;
    let c_tilde = 2.0 * sup_u / (3.0 * r * r);
    let gamma_short = (0.25 * (lambda / big_lambda).sqrt()).powf(nf);
    let gamma_medium = 3f64.powf(-nf / 2.0) * RHO.powf(nf);
    let b = 3.0 * big_lambda.powf(alpha / 2.0);
    let r2a = r.powf(2.0 - alpha);
    let c1 = 2.0 * sup_u / r.powf(alpha);
    let c2 = (16.0 * c_tilde * big_lambda * r2a + 4.0 * r2a + 1.0) / tau;
    let c3 = 12.0 * c_tilde * r;
    let c4_medium = quadratic_root(gamma_medium, b);
    let c4_short = quadratic_root(gamma_short, b);
    let c = SAFETY_FACTOR * [c1, c2, c3, c4_medium, c4_short, 1.0].into_iter().fold(0.0, f64::max);

    let ratio = (big_lambda / lambda).sqrt();
    let n1 = 4.0 * ratio;
    let n2 = 2f64.powf(3.5) * big_lambda * ratio * c;
    let n1_uniform = 4.0 * 3f64.sqrt();
    let n2_uniform = 384f64.sqrt() * big_lambda * c;
    let n_annuli = int_at_least(n1)
        .max(int_above(n2))
        .max(int_at_least(n1_uniform))
        .max(int_above(n2_uniform));

    Ok(ComparisonConstants {
        n,
        lambda,
        big_lambda,
        alpha,
        c,
        c_tilde,
        n_annuli,
        r,
        sup_u,
        tau,
        gamma_short,
        gamma_medium,
        candidates: Candidates {
            c1,
            c2,
            c3,
            c4_medium,
            c4_short,
            n1,
            n2,
            n1_uniform,
            n2_uniform,
        },
    })
}

impl ComparisonConstants {
    /// Replaces `C` without re-deriving anything else. Used for negative
    /// controls; the result generally violates the ledger.
    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    /// `γ C² − 3 C Λ^{α/2} − 2` for the given `γ`.
    pub fn gamma_margin(&self, gamma: f64) -> f64 {
        gamma * self.c * self.c - 3.0 * self.c * self.big_lambda.powf(self.alpha / 2.0) - 2.0
    }

    /// The short-distance inequality `γ_short C² − 3CΛ^{α/2} − 2 > 0`.
    pub fn short_distance_margin(&self) -> f64 {
        self.gamma_margin(self.gamma_short)
    }

    /// Every inequality the ledger is required to satisfy.
    pub fn checks(&self) -> Vec<LedgerCheck> {
        let r2a = self.r.powf(2.0 - self.alpha);
        let ratio = (self.big_lambda / self.lambda).sqrt();
        let nn = self.n_annuli as f64;
        let mut out = vec![
            ("C1", self.c, 2.0 * self.sup_u / self.r.powf(self.alpha)),
            (
                "C2",
                self.c,
                (16.0 * self.c_tilde * self.big_lambda * r2a + 4.0 * r2a + 1.0) / self.tau,
            ),
            ("C3", self.c, 12.0 * self.c_tilde * self.r),
            ("C4", self.gamma_margin(self.gamma_medium), 0.0),
            ("C4_short", self.short_distance_margin(), 0.0),
            ("C>1", self.c, 1.0),
            ("N2", nn, 2f64.powf(3.5) * self.big_lambda * ratio * self.c),
            ("N2_uniform", nn, 384f64.sqrt() * self.big_lambda * self.c),
        ]
        .into_iter()
        .map(|(name, lhs, rhs)| LedgerCheck {
            name: name.to_string(),
            lhs,
            rhs,
            holds: lhs > rhs,
        })
        .collect::<Vec<_>>();
        for (name, rhs) in [("N1", 4.0 * ratio), ("N1_uniform", 4.0 * 3f64.sqrt())] {
            out.push(LedgerCheck {
                name: name.to_string(),
                lhs: nn,
                rhs,
                holds: nn >= rhs,
            });
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.checks().iter().all(|c| c.holds)
    }
}
