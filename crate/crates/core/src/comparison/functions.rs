//! `f₁`, the annular step function `f₂`, and their increments.
//!
//! `f₂` takes values `C^{2(2N−i)} ε^α` with `C^{4N}` far beyond the range of
//! any float, so it is handled through its natural logarithm.

use serde::{Deserialize, Serialize};

use crate::comparison::ComparisonConstants;
use crate::scalar::Real;

fn as_f64<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `C|x−z|^α + C̃|x+z|²`.
pub fn f1<T: Real>(x: &[T], z: &[T], k: &ComparisonConstants) -> f64 {
    let (x, z) = (as_f64(x), as_f64(z));
    let d2: f64 = x.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum();
    let s2: f64 = x.iter().zip(&z).map(|(a, b)| (a + b) * (a + b)).sum();
    k.c * d2.powf(k.alpha / 2.0) + k.c_tilde * s2
}

/// `f₁(x+h, z+k) − f₁(x, z)` given `d = x − z`, `p = x + z` and the two
/// displacements. Evaluated without forming the perturbed points, so the
/// result keeps full relative accuracy even when `|h|, |k| ≪ |x−z|`.
pub fn f1_increment(d: &[f64], p: &[f64], h: &[f64], kz: &[f64], k: &ComparisonConstants) -> f64 {
    let mut dd = 0.0;
    let mut d_delta = 0.0;
    let mut delta2 = 0.0;
    let mut p_sigma = 0.0;
    let mut sigma2 = 0.0;
    for i in 0..d.len() {
        let delta = h[i] - kz[i];
        let sigma = h[i] + kz[i];
        dd += d[i] * d[i];
        d_delta += d[i] * delta;
        delta2 += delta * delta;
        p_sigma += p[i] * sigma;
        sigma2 += sigma * sigma;
    }
    let holder = if dd > 0.0 {
        let s = 2.0 * d_delta + delta2;
        k.c * dd.powf(k.alpha / 2.0) * ((k.alpha / 2.0) * (s / dd).ln_1p()).exp_m1()
    } else {
        k.c * delta2.powf(k.alpha / 2.0)
    };
    holder + k.c_tilde * (2.0 * p_sigma + sigma2)
}

/// Annulus index: the smallest `i` with `|x−z| / (√λ ε) ≤ i/2`.
pub fn annulus_index(distance: f64, eps: f64, lambda: f64) -> u64 {
    let t = distance / (lambda.sqrt() * eps);
    (2.0 * t).ceil().max(0.0) as u64
}

/// `ln f₂` on annulus `i`, `None` where `f₂ = 0` (`i > 2N`).
pub fn log_f2_index(i: u64, eps: f64, k: &ComparisonConstants) -> Option<f64> {
    let top = 2 * k.n_annuli;
    (i <= top).then(|| 2.0 * (top - i) as f64 * k.c.ln() + k.alpha * eps.ln())
}

/// `ln f₂(x, z)`, or `None` where `f₂ = 0`.
pub fn log_f2<T: Real>(x: &[T], z: &[T], eps: f64, k: &ComparisonConstants) -> Option<f64> {
    let d: f64 = x
        .iter()
        .zip(z)
        .map(|(a, b)| (a.as_f64() - b.as_f64()).powi(2))
        .sum::<f64>()
        .sqrt();
    log_f2_index(annulus_index(d, eps, k.lambda), eps, k)
}

/// `f₂(x, z)` as a float; overflows to `+∞` on the inner annuli.
pub fn f2<T: Real>(x: &[T], z: &[T], eps: f64, k: &ComparisonConstants) -> f64 {
    log_f2(x, z, eps, k).map_or(0.0, f64::exp)
}

/// `f = f₁ − f₂`, kept as its two parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonValue {
    pub f1: f64,
    pub log_f2: Option<f64>,
}

impl ComparisonValue {
    pub fn value(&self) -> f64 {
        self.f1 - self.log_f2.map_or(0.0, f64::exp)
    }
}

pub fn comparison<T: Real>(x: &[T], z: &[T], eps: f64, k: &ComparisonConstants) -> ComparisonValue {
    ComparisonValue {
        f1: f1(x, z, k),
        log_f2: log_f2(x, z, eps, k),
    }
}

/// `ln Σ exp(vᵢ)` over finite entries; `None` for an empty sum.
pub fn log_sum_exp(v: impl IntoIterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = v.into_iter().filter(|x| x.is_finite()).collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return None;
    }
    Some(m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln())
}

pub(crate) fn sum_diff(x: &[f64], z: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (
        x.iter().zip(z).map(|(a, b)| a - b).collect(),
        x.iter().zip(z).map(|(a, b)| a + b).collect(),
    )
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub(crate) fn to_f64<T: Real>(v: &[T]) -> Vec<f64> {
    as_f64(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comparison::build_constants;
    use crate::matcore::EllipticityClass;

    fn ledger() -> ComparisonConstants {
        build_constants(&EllipticityClass::new(2, 1.0, 1.5).unwrap(), 0.1, 1.0, 1.0).unwrap()
    }

    #[test]
    fn f1_vanishes_at_origin() {
        assert_eq!(f1(&[0.0, 0.0], &[0.0, 0.0], &ledger()), 0.0);
    }

    #[test]
    fn increment_matches_direct_difference() {
        let k = ledger();
        let x = [0.3, -0.2];
        let z = [-0.1, 0.4];
        let h = [0.01, 0.02];
        let kz = [-0.03, 0.005];
        let (d, p) = sum_diff(&x, &z);
        let direct = f1(&[x[0] + h[0], x[1] + h[1]], &[z[0] + kz[0], z[1] + kz[1]], &k) - f1(&x, &z, &k);
        let inc = f1_increment(&d, &p, &h, &kz, &k);
        assert!((inc - direct).abs() < 1e-9 * direct.abs().max(1.0));
    }

    #[test]
    fn increment_is_accurate_for_tiny_steps() {
        // direct subtraction loses every digit here; compare with the
        // first-order term instead
        let mut k = ledger();
        k.c_tilde = 0.0;
        let d = [0.5, 0.0];
        let h = [1e-12, 0.0];
        let inc = f1_increment(&d, &[0.0, 0.0], &h, &[0.0, 0.0], &k);
        let first = k.c * k.alpha * 0.5f64.powf(k.alpha - 1.0) * 1e-12;
        assert!((inc / first - 1.0).abs() < 1e-9);
    }

    #[test]
    fn annulus_boundaries_fall_to_lower_index() {
        assert_eq!(annulus_index(0.0, 1.0, 1.0), 0);
        assert_eq!(annulus_index(0.5, 1.0, 1.0), 1);
        assert_eq!(annulus_index(0.5000001, 1.0, 1.0), 2);
        assert_eq!(annulus_index(1.0, 1.0, 4.0), 1);
    }

    #[test]
    fn f2_supremum_and_cutoff() {
        let k = ledger();
        let eps = 1e-3;
        let top = log_f2(&[0.0, 0.0], &[0.0, 0.0], eps, &k).unwrap();
        let expect = 4.0 * k.n_annuli as f64 * k.c.ln() + k.alpha * eps.ln();
        assert!((top - expect).abs() < 1e-9 * expect.abs());
        let far = 2.0 * k.n_annuli as f64 * eps;
        assert_eq!(f2(&[far, 0.0], &[0.0, 0.0], eps, &k), 0.0);
        let near = log_f2(&[0.3 * eps, 0.0], &[0.0, 0.0], eps, &k).unwrap();
        let expect = 2.0 * (2 * k.n_annuli - 1) as f64 * k.c.ln() + k.alpha * eps.ln();
        assert!((near - expect).abs() < 1e-9 * expect.abs());
    }

    #[test]
    fn last_annulus_is_eps_alpha() {
        let mut k = ledger();
        k.n_annuli = 3;
        let eps = 0.01;
        let v = f2(&[3.0 * eps, 0.0], &[0.0, 0.0], eps, &k);
        assert!((v - eps.powf(k.alpha)).abs() < 1e-15);
    }

    #[test]
    fn log_sum_exp_is_stable() {
        let v = log_sum_exp([1000.0, 1000.0]).unwrap();
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp([f64::NEG_INFINITY]), None);
    }
}
