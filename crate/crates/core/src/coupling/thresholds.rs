//! Closed-form distortion thresholds and objective bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{principal_sqrt, EllipticityClass, SymMatrix};
use crate::scalar::Real;

/// Upper bounds on `Λ/λ` under which the respective coupling argument works.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// `(n(1−α)^{1/n} + (1−α)) / (n−1)`, optimal coupling.
    pub optimal: f64,
    /// `(n+1)/(n−1)`, the `α → 0` limit of `optimal`.
    pub limit: f64,
    /// `(n+1)/(n−1+2α)`, fixed mirror reflection.
    pub mirror: f64,
    /// `(1 + 2√((1−α)/(n−1)))²`, diagonal (axis-aligned) matrices only.
    pub diagonal: f64,
}

fn check(n: usize, alpha: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::param("n", "dimension must be at least 2"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", "must lie in (0, 1)"));
    }
    Ok(())
}

pub fn thresholds(n: usize, alpha: f64) -> Result<Thresholds> {
    check(n, alpha)?;
    let nf = n as f64;
    let b = 1.0 - alpha;
    Ok(Thresholds {
        optimal: (nf * b.powf(1.0 / nf) + b) / (nf - 1.0),
        limit: (nf + 1.0) / (nf - 1.0),
        mirror: (nf + 1.0) / (nf - 1.0 + 2.0 * alpha),
        diagonal: (1.0 + 2.0 * (b / (nf - 1.0)).sqrt()).powi(2),
    })
}

fn bracket<T: Real>(cls: &EllipticityClass<T>, alpha: T) -> T {
    let n = T::from_usize_lossy(cls.n);
    let b = T::one() - alpha;
    (b + n * b.powf(T::one() / n)) * cls.lambda - (n - T::one()) * cls.big_lambda
}

/// `τ = α/(n+2) · [((1−α) + n(1−α)^{1/n}) λ − (n−1) Λ]`, positive exactly when
/// `Λ/λ` is below the optimal threshold.
pub fn tau<T: Real>(cls: &EllipticityClass<T>, alpha: T) -> Result<T> {
    check(cls.n, alpha.as_f64())?;
    let n = T::from_usize_lossy(cls.n);
    Ok(alpha / (n + T::lit(2.0)) * bracket(cls, alpha))
}

/// `2[(n−1)Λ − ((1−α) + n(1−α)^{1/n}) λ]`, an upper bound for the optimal
/// objective over all pairs in the class.
pub fn min_trace_bound<T: Real>(cls: &EllipticityClass<T>, alpha: T) -> Result<T> {
    check(cls.n, alpha.as_f64())?;
    Ok(-T::lit(2.0) * bracket(cls, alpha))
}

/// `2[(n−1+2α)Λ − (n+1)λ]`, an upper bound for the mirror objective.
pub fn mirror_objective_bound<T: Real>(cls: &EllipticityClass<T>, alpha: T) -> Result<T> {
    check(cls.n, alpha.as_f64())?;
    let n = T::from_usize_lossy(cls.n);
    let two = T::lit(2.0);
    Ok(two * ((n - T::one() + two * alpha) * cls.big_lambda - (n + T::one()) * cls.lambda))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuityMargin {
    /// Frobenius norm `‖A₁^{1/2} − A₂^{1/2}‖`.
    pub closeness: f64,
    /// `(1−α)λ / (2√(nΛ))`.
    pub bound: f64,
    /// `closeness ≤ bound`; then the optimal objective is at most `−2(1−α)λ`.
    pub sufficient: bool,
}

pub fn continuity_margin<T: Real>(
    a1: &SymMatrix<T>,
    a2: &SymMatrix<T>,
    cls: &EllipticityClass<T>,
    alpha: T,
) -> Result<ContinuityMargin> {
    check(cls.n, alpha.as_f64())?;
    let s1 = principal_sqrt(a1)?;
    let s2 = principal_sqrt(a2)?;
    let d = s1.as_matrix().sub(s2.as_matrix());
    let closeness = d.frobenius_norm().as_f64();
    let (l, big_l, a) = (cls.lambda.as_f64(), cls.big_lambda.as_f64(), alpha.as_f64());
    let bound = (1.0 - a) * l / (2.0 * (cls.n as f64 * big_l).sqrt());
    Ok(ContinuityMargin {
        closeness,
        bound,
        sufficient: closeness <= bound,
    })
}

/// Optimal objective for diagonal `A₁ = diag(a)`, `A₂ = diag(b)` with the
/// standard frame: `−(1−α)(√a₁ + √b₁)² + Σ_{i≥2} (√aᵢ − √bᵢ)²`. Negative
/// exactly when the diagonal criterion holds.
pub fn diagonal_objective<T: Real>(a: &[T], b: &[T], alpha: T) -> T {
    let first = (a[0].sqrt() + b[0].sqrt()).powi(2);
    let rest: T = a[1..]
        .iter()
        .zip(&b[1..])
        .map(|(&x, &y)| (x.sqrt() - y.sqrt()).powi(2))
        .sum();
    rest - (T::one() - alpha) * first
}
