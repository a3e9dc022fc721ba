//! Averages over the unit ball: product Gauss rules for `n ∈ {2, 3}`,
//! randomly shifted Halton points otherwise, and plain Monte Carlo.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::ellipsoid::sample_unit_ball_into;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::stats::{Estimate, RunningStats};

/// Angular trapezoid nodes used in the plane (and per azimuth in space).
pub const ANGLE_NODES: usize = 64;
/// Default QMC budget for `n ≥ 4`.
pub const QMC_POINTS: usize = 1 << 16;
/// Independent random shifts used to attach an error bar to a QMC average.
pub const QMC_REPLICAS: usize = 8;

/// How a ball average `⨍_𝔹 g(y) dy` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Integrator {
    Quadrature { degree: usize },
    MonteCarlo { samples: usize },
    Qmc { points: usize },
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::Quadrature { degree: 8 }
    }
}

impl Integrator {
    /// Quadrature where a product rule exists, QMC otherwise.
    pub fn smooth_default(n: usize) -> Self {
        if n == 2 || n == 3 {
            Integrator::Quadrature { degree: 8 }
        } else {
            Integrator::Qmc { points: QMC_POINTS }
        }
    }

    /// `⨍_𝔹 g`. Deterministic rules report a zero standard error.
    pub fn ball_average<T, R, G>(&self, n: usize, rng: &mut R, mut g: G) -> Result<Estimate>
    where
        T: Real,
        R: Rng + ?Sized,
        G: FnMut(&[T]) -> f64,
    {
        match *self {
            Integrator::Quadrature { degree } => {
                let rule = ball_quadrature::<T>(n, degree)?;
                Ok(Estimate::exact(rule.integrate(&mut g)))
            }
            Integrator::MonteCarlo { samples } => {
                if samples < 2 {
                    return Err(Error::param("samples", "at least two samples are required"));
                }
                let mut stats = RunningStats::new();
                let mut y = vec![T::zero(); n];
                for _ in 0..samples {
                    sample_unit_ball_into(rng, &mut y);
                    stats.push(g(&y));
                }
                Ok(stats.estimate())
            }
            Integrator::Qmc { points } => {
                let per = points / QMC_REPLICAS;
                if per == 0 {
                    return Err(Error::param("points", "too few QMC points"));
                }
                let mut stats = RunningStats::new();
                for _ in 0..QMC_REPLICAS {
                    let rule = BallRule::<T>::shifted_halton(n, per, rng);
                    stats.push(rule.integrate(&mut g));
                }
                let mut est = stats.estimate();
                est.samples = (per * QMC_REPLICAS) as u64;
                Ok(est)
            }
        }
    }
}

/// Nodes in the unit ball with weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct BallRule<T> {
    pub n: usize,
    pub nodes: Vec<Vec<T>>,
    pub weights: Vec<T>,
}

impl<T: Real> BallRule<T> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, mut g: impl FnMut(&[T]) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(y, &w)| w.as_f64() * g(y))
            .sum()
    }

    /// Halton points in `n + 1` dimensions with one uniform shift mod 1; the
    /// first `n` coordinates become a Gaussian direction, the last the radius.
    pub fn shifted_halton<R: Rng + ?Sized>(n: usize, points: usize, rng: &mut R) -> Self {
        let primes = first_primes(n + 1);
        let shift: Vec<f64> = (0..=n).map(|_| rng.random()).collect();
        let normal = Normal::standard();
        let w = T::lit(1.0 / points as f64);
        let mut nodes = Vec::with_capacity(points);
        for i in 1..=points {
            let u: Vec<f64> = primes
                .iter()
                .zip(&shift)
                .map(|(&p, &s)| {
                    let v = (radical_inverse(i as u64, p) + s).fract();
                    v.clamp(1e-300, 1.0 - 1e-16)
                })
                .collect();
            let g: Vec<f64> = u[..n].iter().map(|&ui| normal.inverse_cdf(ui)).collect();
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            let r = u[n].powf(1.0 / n as f64);
            nodes.push(g.iter().map(|&gi| T::lit(gi / norm * r)).collect());
        }
        BallRule {
            n,
            nodes,
            weights: vec![w; points],
        }
    }
}

fn first_primes(k: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(k);
    let mut c = 2u64;
    while out.len() < k {
        if out.iter().take_while(|&&p| p * p <= c).all(|&p| c % p != 0) {
            out.push(c);
        }
        c += 1;
    }
    out
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut v = 0.0;
    while i > 0 {
        v += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    v
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(m, z);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = wi;
        w[m - 1 - i] = wi;
    }
    (x, w)
}

fn legendre(m: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Product rule over the unit ball, exact (as a normalized average) for
/// polynomials of total degree `≤ degree`. Available for `n ∈ {2, 3}`.
pub fn ball_quadrature<T: Real>(n: usize, degree: usize) -> Result<BallRule<T>> {
    if degree < 4 {
        return Err(Error::param("degree", "quadrature degree must be at least 4"));
    }
    match n {
        2 => Ok(disk_rule(degree)),
        3 => Ok(sphere_rule(degree)),
        _ => Err(Error::UnsupportedDimension(n)),
    }
}

/// Radial Gauss–Legendre nodes on `[0, 1]` (weights sum to 1).
fn radial(m: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(m);
    x.iter().zip(&w).map(|(&xi, &wi)| ((xi + 1.0) / 2.0, wi / 2.0)).collect()
}

fn disk_rule<T: Real>(degree: usize) -> BallRule<T> {
    let m = (degree + 2).div_ceil(2);
    let k = ANGLE_NODES.max(degree + 1);
    let mut nodes = Vec::with_capacity(m * k);
    let mut weights = Vec::with_capacity(m * k);
    for (r, wr) in radial(m) {
        for j in 0..k {
            let t = 2.0 * PI * j as f64 / k as f64;
            nodes.push(vec![T::lit(r * t.cos()), T::lit(r * t.sin())]);
            // (1/π) ∫₀¹∫₀^{2π} g r dθ dr
            weights.push(T::lit(2.0 * wr * r / k as f64));
        }
    }
    BallRule { n: 2, nodes, weights }
}

fn sphere_rule<T: Real>(degree: usize) -> BallRule<T> {
    let m = (degree + 3).div_ceil(2);
    let p = (degree + 1).div_ceil(2);
    let mut k = (degree + 1).max(2 * p);
    k += k % 2;
    let (ct, wt) = gauss_legendre(p);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for (r, wr) in radial(m) {
        for (&c, &wc) in ct.iter().zip(&wt) {
            let s = (1.0 - c * c).sqrt();
            for j in 0..k {
                let phi = 2.0 * PI * j as f64 / k as f64;
                nodes.push(vec![T::lit(r * s * phi.cos()), T::lit(r * s * phi.sin()), T::lit(r * c)]);
                // (3/4π) ∫ r² dr ∫ d(cos θ) ∫ dφ
                weights.push(T::lit(wr * r * r * wc * (2.0 * PI / k as f64) * 3.0 / (4.0 * PI)));
            }
        }
    }
    BallRule { n: 3, nodes, weights }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let (x, w) = gauss_legendre(5);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        // ∫ x⁸ = 2/9
        let v: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(8)).sum();
        assert!((v - 2.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn disk_moments() {
        let rule = ball_quadrature::<f64>(2, 4).unwrap();
        assert!((rule.integrate(|_| 1.0) - 1.0).abs() < 1e-14);
        assert!(rule.integrate(|y| y[0]).abs() < 1e-14);
        assert!((rule.integrate(|y| y[0] * y[0]) - 0.25).abs() < 1e-14);
        assert!(rule.integrate(|y| y[0] * y[1]).abs() < 1e-14);
        // ⨍ |y|⁴ = 2/(n+4) = 1/3
        let r4 = rule.integrate(|y| (y[0] * y[0] + y[1] * y[1]).powi(2));
        assert!((r4 - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_moments() {
        let rule = ball_quadrature::<f64>(3, 6).unwrap();
        assert!((rule.integrate(|_| 1.0) - 1.0).abs() < 1e-14);
        for i in 0..3 {
            assert!((rule.integrate(|y| y[i] * y[i]) - 0.2).abs() < 1e-14);
        }
        // sphere moment ⨍ x²z⁴ = 1·3/(3·5·7), radial factor 3∫₀¹ r⁸ dr
        let r = rule.integrate(|y| y[0] * y[0] * y[2].powi(4));
        let expect = (1.0 / 35.0) * (3.0 / 9.0);
        assert!((r - expect).abs() < 1e-14);
    }

    #[test]
    fn unsupported_configurations() {
        assert!(matches!(ball_quadrature::<f64>(4, 6), Err(Error::UnsupportedDimension(4))));
        assert!(ball_quadrature::<f64>(2, 3).is_err());
    }

    #[test]
    fn qmc_second_moment_in_four_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let est = Integrator::Qmc { points: 1 << 14 }
            .ball_average::<f64, _, _>(4, &mut rng, |y| y[0] * y[0])
            .unwrap();
        assert!((est.mean - 1.0 / 6.0).abs() < 2e-3);
    }
}
