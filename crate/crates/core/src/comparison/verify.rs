//! Numerical checks of the one-step inequality `f(x,z) > ⨍ f(coupled step) + η`
//! and of the two estimates it is assembled from near the diagonal.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::comparison::functions::{norm, sum_diff, to_f64};
use crate::comparison::{annulus_index, f1_increment, log_f2_index, ComparisonConstants, EtaRule, Verdict};
use crate::coupling::{medium_distance_coupling, optimal_coupling_from_roots, WeightMatrix};
use crate::ellipsoid::{sample_unit_ball_into, CoefficientField, Integrator};
use crate::error::{Error, Result};
use crate::matcore::{principal_sqrt, Matrix, OrthoMatrix, SymMatrix};
use crate::scalar::Real;
use crate::stats::RunningStats;

/// Which distance regime a pair falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `|x−z| > N√λ ε`: `f₂(x,z) = 0`, smooth integrand, optimal coupling.
    Large,
    /// `½√λ ε < |x−z| ≤ N√λ ε`: Monte Carlo over the annuli.
    Medium,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Rule for the smooth `f₁` average in the large-distance branch.
    pub integrator: Integrator,
    /// Samples for every average involving `f₂`.
    pub mc_samples: usize,
    pub eta: EtaRule,
    /// Width of the error band, in standard errors.
    pub sigmas: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            integrator: Integrator::default(),
            mc_samples: 1_000_000,
            eta: EtaRule::EpsSquared,
            sigmas: 3.0,
        }
    }
}

/// The true margin is `margin · exp(log_scale)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyInequalityReport {
    pub branch: Branch,
    /// `|x−z| / (√λ ε)`.
    pub distance_ratio: f64,
    pub margin: f64,
    pub stderr: f64,
    pub log_scale: f64,
    pub eta: f64,
    pub verdict: Verdict,
}

impl KeyInequalityReport {
    pub fn holds(&self) -> bool {
        self.verdict.holds()
    }
}

/// `⨍ f₂(coupled step)` against `γ C² f₂(x,z)`, both as logarithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F2AverageReport {
    pub log_lhs: f64,
    pub log_rhs: f64,
    /// Standard error of `lhs`, relative to `lhs`.
    pub rel_stderr: f64,
    pub samples: usize,
    pub verdict: Verdict,
}

impl F2AverageReport {
    pub fn holds(&self) -> bool {
        self.verdict.holds()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepBoundReport {
    /// `3 C Λ^{α/2} ε^α`.
    pub bound: f64,
    /// Largest observed `f₁(x+h, z+k) − f₁(x, z)`.
    pub worst_increment: f64,
    pub trials: usize,
    pub violations: usize,
}

impl StepBoundReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

struct Pair {
    d: Vec<f64>,
    p: Vec<f64>,
    dist: f64,
    ratio: f64,
}

fn pair<T: Real>(x: &[T], z: &[T], eps: f64, k: &ComparisonConstants) -> Result<Pair> {
    if x.len() != k.n || z.len() != k.n {
        return Err(Error::DimensionMismatch {
            expected: k.n,
            got: if x.len() != k.n { x.len() } else { z.len() },
        });
    }
    if !(eps > 0.0) {
        return Err(Error::param("eps", "must be positive"));
    }
    let (d, p) = sum_diff(&to_f64(x), &to_f64(z));
    let dist = norm(&d);
    Ok(Pair {
        ratio: dist / (k.lambda.sqrt() * eps),
        d,
        p,
        dist,
    })
}

fn require_in_ball<T: Real>(x: &[T], r: f64) -> Result<()> {
    if norm(&to_f64(x)) >= r {
        return Err(Error::Precondition(format!("point {:?} lies outside B_r, r = {r}", to_f64(x))));
    }
    Ok(())
}

fn roots<T: Real>(field: &CoefficientField<T>, x: &[T], z: &[T]) -> Result<(SymMatrix<f64>, SymMatrix<f64>)> {
    let a1 = field.evaluate(x)?.cast::<f64>();
    let a2 = field.evaluate(z)?.cast::<f64>();
    Ok((principal_sqrt(&a1)?, principal_sqrt(&a2)?))
}

/// Step maps `y ↦ ε S₁ y` and `y ↦ ε S₂ Q y`.
fn step_maps(s1: &SymMatrix<f64>, s2: &SymMatrix<f64>, q: &Matrix<f64>, eps: f64) -> (Matrix<f64>, Matrix<f64>) {
    (s1.scale(eps).into_matrix(), s2.matmul(q).scale(eps))
}

/// Annulus occupation and `f₁` increments of the coupled step.
struct StepSample {
    increments: RunningStats,
    annuli: BTreeMap<u64, u64>,
    samples: usize,
}

fn sample_steps<R: Rng + ?Sized>(
    pair: &Pair,
    m1: &Matrix<f64>,
    m2: &Matrix<f64>,
    eps: f64,
    k: &ComparisonConstants,
    samples: usize,
    rng: &mut R,
) -> StepSample {
    let n = pair.d.len();
    let mut y = vec![0.0; n];
    let mut h = vec![0.0; n];
    let mut kz = vec![0.0; n];
    let mut increments = RunningStats::new();
    let mut annuli = BTreeMap::new();
    let dd = pair.dist * pair.dist;
    for _ in 0..samples {
        sample_unit_ball_into(rng, &mut y);
        m1.mul_vec_into(&y, &mut h);
        m2.mul_vec_into(&y, &mut kz);
        increments.push(f1_increment(&pair.d, &pair.p, &h, &kz, k));
        let mut s = 0.0;
        for i in 0..n {
            let delta = h[i] - kz[i];
            s += 2.0 * pair.d[i] * delta + delta * delta;
        }
        let post = (dd + s).max(0.0).sqrt();
        *annuli.entry(annulus_index(post, eps, k.lambda)).or_insert(0) += 1;
    }
    StepSample {
        increments,
        annuli,
        samples,
    }
}

/// `Σ pᵢ C^{2(j−i)}` over occupied annuli `i ≤ 2N`, returned as
/// `(shift, mean, stderr)` with the true values scaled by `exp(shift)`.
fn annulus_ratio(annuli: &BTreeMap<u64, u64>, samples: usize, j: u64, k: &ComparisonConstants) -> Option<(f64, f64, f64)> {
    let top = 2 * k.n_annuli;
    let ln_c2 = 2.0 * k.c.ln();
    let terms: Vec<(f64, f64)> = annuli
        .iter()
        .filter(|(&i, _)| i <= top)
        .map(|(&i, &count)| ((j as f64 - i as f64) * ln_c2, count as f64 / samples as f64))
        .collect();
    let shift = terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return None;
    }
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for &(lw, p) in &terms {
        let w = (lw - shift).exp();
        m1 += p * w;
        m2 += p * w * w;
    }
    let var = (m2 - m1 * m1).max(0.0) / (samples.max(2) - 1) as f64;
    Some((shift, m1, var.sqrt()))
}

/// Evaluates the margin `f(x,z) − ⨍_𝔹 f(x + εA(x)^{1/2}y, z + εA(z)^{1/2}Qy) dy − η`.
///
/// With `q = None` the coupling is chosen by regime: the optimal coupling for
/// the weight aligned with `x − z` at large distance, the medium-distance
/// reflection otherwise. Pairs at distance `≤ ½√λ ε` are rejected.
#[allow(clippy::too_many_arguments)]
pub fn verify_key_inequality<T: Real, R: Rng + ?Sized>(
    x: &[T],
    z: &[T],
    field: &CoefficientField<T>,
    q: Option<&OrthoMatrix<T>>,
    eps: f64,
    k: &ComparisonConstants,
    opts: &VerifyOptions,
    rng: &mut R,
) -> Result<KeyInequalityReport> {
    let pr = pair(x, z, eps, k)?;
    require_in_ball(x, k.r)?;
    require_in_ball(z, k.r)?;
    if pr.ratio <= 0.5 {
        return Err(Error::Precondition(format!(
            "|x−z| / (√λ ε) = {} must exceed 1/2",
            pr.ratio
        )));
    }
    let (s1, s2) = roots(field, x, z)?;
    let direction: Vec<f64> = pr.d.iter().map(|v| v / pr.dist).collect();
    let eta = opts.eta.value(eps, k.alpha);
    let large = pr.ratio > k.n_annuli as f64;
    let q: Matrix<f64> = match q {
        Some(q) => q.as_matrix().cast(),
        None if large => {
            let w = WeightMatrix::along(&direction, k.alpha)?;
            optimal_coupling_from_roots(&s1, &s2, &w)?.q.into_matrix()
        }
        None => {
            let a1 = SymMatrix::symmetrize(&s1.matmul(&s1));
            let a2 = SymMatrix::symmetrize(&s2.matmul(&s2));
            medium_distance_coupling(&a1, &a2, &direction)?.into_matrix()
        }
    };
    let (m1, m2) = step_maps(&s1, &s2, &q, eps);
    if large {
        large_branch(&pr, &m1, &m2, eps, eta, k, opts, rng)
    } else {
        medium_branch(&pr, &m1, &m2, eps, eta, k, opts, rng)
    }
}

#[allow(clippy::too_many_arguments)]
fn large_branch<R: Rng + ?Sized>(
    pr: &Pair,
    m1: &Matrix<f64>,
    m2: &Matrix<f64>,
    eps: f64,
    eta: f64,
    k: &ComparisonConstants,
    opts: &VerifyOptions,
    rng: &mut R,
) -> Result<KeyInequalityReport> {
    let n = pr.d.len();
    let mut h = vec![0.0; n];
    let mut kz = vec![0.0; n];
    let mut inc = |y: &[f64]| {
        m1.mul_vec_into(y, &mut h);
        m2.mul_vec_into(y, &mut kz);
        f1_increment(&pr.d, &pr.p, &h, &kz, k)
    };
    let avg = opts.integrator.ball_average::<f64, _, _>(n, rng, &mut inc)?;
    let magnitude = opts.integrator.ball_average::<f64, _, _>(n, rng, |y: &[f64]| inc(y).abs())?;
    let rounding = 64.0 * f64::EPSILON * magnitude.mean;
    let f1_margin = -avg.mean - eta;
    let band = opts.sigmas * avg.stderr + rounding;

    // After one step the separation is at least |x−z| − 2√Λ ε; f₂ can only
    // enter the average when that lower bound is within the N-th annulus.
    let reach = 2.0 * k.big_lambda.sqrt() * eps;
    let min_index = annulus_index((pr.dist - reach).max(0.0), eps, k.lambda);
    let gain = match log_f2_index(min_index, eps, k) {
        None => None,
        Some(reference) => {
            let sample = sample_steps(pr, m1, m2, eps, k, opts.mc_samples, rng);
            let j = min_index;
            annulus_ratio(&sample.annuli, sample.samples, j, k).and_then(|(shift, mean, se)| {
                let lower = mean - opts.sigmas * se;
                (lower > 0.0).then(|| reference + shift + lower.ln())
            })
        }
    };
    let (margin, stderr, log_scale) = match gain {
        None => (f1_margin, avg.stderr, 0.0),
        Some(lg) => {
            let s = (-lg).exp();
            (f1_margin * s + 1.0, avg.stderr * s, lg)
        }
    };
    let band = if log_scale == 0.0 { band } else { band * (-log_scale).exp() };
    Ok(KeyInequalityReport {
        branch: Branch::Large,
        distance_ratio: pr.ratio,
        margin,
        stderr,
        log_scale,
        eta,
        verdict: Verdict::classify(margin, band),
    })
}

#[allow(clippy::too_many_arguments)]
fn medium_branch<R: Rng + ?Sized>(
    pr: &Pair,
    m1: &Matrix<f64>,
    m2: &Matrix<f64>,
    eps: f64,
    eta: f64,
    k: &ComparisonConstants,
    opts: &VerifyOptions,
    rng: &mut R,
) -> Result<KeyInequalityReport> {
    let j = annulus_index(pr.dist, eps, k.lambda);
    let l0 = log_f2_index(j, eps, k).expect("medium branch lies inside the support of f2");
    let sample = sample_steps(pr, m1, m2, eps, k, opts.mc_samples, rng);
    let inc = sample.increments.estimate();
    let inv = (-l0).exp();
    let c = (inc.mean + eta) * inv;
    let c_se = inc.stderr * inv;
    let (shift, mean, se) = annulus_ratio(&sample.annuli, sample.samples, j, k).unwrap_or((0.0, 0.0, 0.0));
    let top = shift.max(0.0);
    let a = (shift - top).exp();
    let b = (-top).exp();
    let margin = a * mean - (1.0 + c) * b;
    let stderr = a * se + c_se * b;
    Ok(KeyInequalityReport {
        branch: Branch::Medium,
        distance_ratio: pr.ratio,
        margin,
        stderr,
        log_scale: l0 + top,
        eta,
        verdict: Verdict::classify(margin, opts.sigmas * stderr),
    })
}

/// Tests `f₁(x+h, z+k) ≤ f₁(x,z) + 3CΛ^{α/2}ε^α` for random `|h|, |k| < √Λ ε`
/// plus the near-extremal displacement `h = k` along `x + z`.
pub fn f1_step_bound_check<T: Real, R: Rng + ?Sized>(
    x: &[T],
    z: &[T],
    k: &ComparisonConstants,
    eps: f64,
    trials: usize,
    rng: &mut R,
) -> Result<StepBoundReport> {
    let pr = pair(x, z, eps, k)?;
    require_in_ball(x, k.r)?;
    require_in_ball(z, k.r)?;
    let reach = k.big_lambda.sqrt() * eps;
    if reach >= k.r.min(1.0) {
        return Err(Error::Precondition(format!("√Λ ε = {reach} must be below min(1, r)")));
    }
    let bound = 3.0 * k.c * k.big_lambda.powf(k.alpha / 2.0) * eps.powf(k.alpha);
    let n = k.n;
    let mut h = vec![0.0; n];
    let mut kz = vec![0.0; n];
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0;
    let mut record = |v: f64| {
        worst = worst.max(v);
        if v > bound {
            violations += 1;
        }
    };
    // h = k along x + z, h = −k along x − z, and their bisector
    let scaled = |v: &[f64]| -> Vec<f64> {
        let mut u = crate::matcore::vec::normalized(v).unwrap_or_else(|| crate::matcore::vec::unit(n, 0));
        u.iter_mut().for_each(|c| *c *= reach * (1.0 - 1e-9));
        u
    };
    let along_p = scaled(&pr.p);
    let along_d = scaled(&pr.d);
    let minus_d: Vec<f64> = along_d.iter().map(|v| -v).collect();
    let bis_x = scaled(&crate::matcore::vec::add(&along_p, &along_d));
    let bis_z = scaled(&crate::matcore::vec::sub(&along_p, &along_d));
    record(f1_increment(&pr.d, &pr.p, &along_p, &along_p, k));
    record(f1_increment(&pr.d, &pr.p, &along_d, &minus_d, k));
    record(f1_increment(&pr.d, &pr.p, &bis_x, &bis_z, k));
    for _ in 0..trials {
        sample_unit_ball_into(rng, &mut h);
        sample_unit_ball_into(rng, &mut kz);
        h.iter_mut().for_each(|v| *v *= reach);
        kz.iter_mut().for_each(|v| *v *= reach);
        record(f1_increment(&pr.d, &pr.p, &h, &kz, k));
    }
    Ok(StepBoundReport {
        bound,
        worst_increment: worst,
        trials: trials + 3,
        violations,
    })
}

/// Monte Carlo check of `⨍ f₂(x + εA(x)^{1/2}y, z + εA(z)^{1/2}Qy) dy ≥ γ C² f₂(x,z)`
/// with `Q` the medium-distance coupling.
pub fn f2_average_lower_bound_check<T: Real, R: Rng + ?Sized>(
    x: &[T],
    z: &[T],
    field: &CoefficientField<T>,
    eps: f64,
    k: &ComparisonConstants,
    samples: usize,
    rng: &mut R,
) -> Result<F2AverageReport> {
    let pr = pair(x, z, eps, k)?;
    if !(pr.ratio > 0.5 && pr.ratio <= k.n_annuli as f64) {
        return Err(Error::Precondition(format!(
            "|x−z| / (√λ ε) = {} must lie in (1/2, N]",
            pr.ratio
        )));
    }
    if k.big_lambda / k.lambda > 3.0 + 1e-12 {
        return Err(Error::Precondition(format!(
            "distortion {} exceeds 3",
            k.big_lambda / k.lambda
        )));
    }
    if samples < 2 {
        return Err(Error::param("samples", "at least two samples are required"));
    }
    let (s1, s2) = roots(field, x, z)?;
    let direction: Vec<f64> = pr.d.iter().map(|v| v / pr.dist).collect();
    let a1 = SymMatrix::symmetrize(&s1.matmul(&s1));
    let a2 = SymMatrix::symmetrize(&s2.matmul(&s2));
    let q = medium_distance_coupling(&a1, &a2, &direction)?;
    let (m1, m2) = step_maps(&s1, &s2, q.as_matrix(), eps);
    let sample = sample_steps(&pr, &m1, &m2, eps, k, samples, rng);
    let j = annulus_index(pr.dist, eps, k.lambda);
    let l0 = log_f2_index(j, eps, k).expect("checked to lie inside the support of f2");
    let log_rhs = k.gamma_medium.ln() + 2.0 * k.c.ln() + l0;
    let (shift, mean, se) = annulus_ratio(&sample.annuli, samples, j, k).unwrap_or((0.0, 0.0, 0.0));
    let log_lhs = if mean > 0.0 { l0 + shift + mean.ln() } else { f64::NEG_INFINITY };
    let rel = if mean > 0.0 { se / mean } else { f64::INFINITY };
    // compare lhs ± 3 se with rhs, both divided by exp(l0 + shift)
    let target = (log_rhs - l0 - shift).exp();
    let verdict = Verdict::classify(mean - target, 3.0 * se);
    Ok(F2AverageReport {
        log_lhs,
        log_rhs,
        rel_stderr: rel,
        samples,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::comparison::build_constants;
    use crate::matcore::EllipticityClass;

    fn setup() -> (ComparisonConstants, CoefficientField<f64>) {
        let cls = EllipticityClass::new(2, 1.0, 1.5).unwrap();
        let k = build_constants(&cls, 0.1, 1.0, 1.0).unwrap();
        let a = SymMatrix::diag(&[1.0, 1.5]);
        (k, CoefficientField::constant(cls, a).unwrap())
    }

    #[test]
    fn large_distance_optimal_coupling_has_positive_margin() {
        let (k, field) = setup();
        let eps = 0.25 / (k.n_annuli as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rep = verify_key_inequality(
            &[0.3, 0.1],
            &[-0.2, 0.0],
            &field,
            None,
            eps,
            &k,
            &VerifyOptions::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(rep.branch, Branch::Large);
        assert_eq!(rep.verdict, Verdict::Holds, "{rep:?}");
    }

    #[test]
    fn identity_coupling_fails_at_large_distance() {
        let (k, _) = setup();
        let field = CoefficientField::identity(2);
        let eps = 0.25 / (k.n_annuli as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rep = verify_key_inequality(
            &[0.3, 0.1],
            &[-0.2, 0.0],
            &field,
            Some(&OrthoMatrix::identity(2)),
            eps,
            &k,
            &VerifyOptions::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(rep.verdict, Verdict::Fails, "{rep:?}");
    }

    #[test]
    fn medium_distance_margin_is_positive() {
        let (k, field) = setup();
        let eps = 1e-3;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let opts = VerifyOptions {
            mc_samples: 20_000,
            ..VerifyOptions::default()
        };
        let rep = verify_key_inequality(&[1.5e-3, 0.0], &[0.0, 0.0], &field, None, eps, &k, &opts, &mut rng).unwrap();
        assert_eq!(rep.branch, Branch::Medium);
        assert!(rep.holds(), "{rep:?}");
    }

    #[test]
    fn short_distance_is_rejected() {
        let (k, field) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = verify_key_inequality(
            &[1e-4, 0.0],
            &[0.0, 0.0],
            &field,
            None,
            1e-3,
            &k,
            &VerifyOptions::default(),
            &mut rng,
        );
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn f2_average_bound_for_identity() {
        let (k, _) = setup();
        let field = CoefficientField::identity(2);
        let eps = 1e-3;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rep = f2_average_lower_bound_check(&[eps, 0.0], &[0.0, 0.0], &field, eps, &k, 20_000, &mut rng).unwrap();
        assert!(rep.holds(), "{rep:?}");
        assert!(rep.log_rhs.is_finite());
    }

    #[test]
    fn step_bound_holds_and_negative_control_fails() {
        let (k, _) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rep = f1_step_bound_check(&[0.4, 0.3], &[0.2, 0.1], &k, 1e-3, 10_000, &mut rng).unwrap();
        assert!(rep.holds(), "{rep:?}");

        let cls = EllipticityClass::new(2, 1.0, 1.5).unwrap();
        let k = build_constants(&cls, 0.5, 1.0, 1.0).unwrap();
        let weak = k.clone().with_c(0.01 * k.candidates.c3);
        let rep = f1_step_bound_check(&[0.49, 0.49], &[0.48, 0.49], &weak, 0.05, 100, &mut rng).unwrap();
        assert!(!rep.holds(), "{rep:?}");
    }
}
