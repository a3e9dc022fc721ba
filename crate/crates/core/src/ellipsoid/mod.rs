//! Ellipsoids `c + S·𝔹`, domains, uniform sampling and overlap estimates.

pub mod config;
pub mod field;
pub mod quadrature;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{eig_sym, principal_sqrt, vec, Matrix, SymMatrix};
use crate::scalar::Real;
use crate::stats::{Estimate, RunningStats};

pub use field::{AngleProfile, CoefficientField, FieldKind};
pub use quadrature::{ball_quadrature, BallRule, Integrator};

/// Lebesgue measure of the unit ball in `ℝⁿ`.
pub fn unit_ball_volume(n: usize) -> f64 {
    // V_n = 2π/n · V_{n−2}, V_0 = 1, V_1 = 2
    let mut v = if n % 2 == 0 { 1.0 } else { 2.0 };
    let mut k = if n % 2 == 0 { 2 } else { 3 };
    while k <= n {
        v *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    v
}

/// Uniform point of the unit ball: Gaussian direction scaled by `U^{1/n}`.
pub fn sample_unit_ball<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<T> {
    let mut out = vec![T::zero(); n];
    sample_unit_ball_into(rng, &mut out);
    out
}

pub fn sample_unit_ball_into<T: Real, R: Rng + ?Sized>(rng: &mut R, out: &mut [T]) {
    let n = out.len();
    loop {
        let mut s = 0.0_f64;
        for o in out.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            s += g * g;
            *o = T::lit(g);
        }
        if s > 0.0 {
            let u: f64 = rng.random();
            let r = T::lit(u.powf(1.0 / n as f64) / s.sqrt());
            for o in out.iter_mut() {
                *o *= r;
            }
            return;
        }
    }
}

/// The ellipsoid `center + shape·𝔹` with a symmetric positive definite shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
#[serde(try_from = "EllipsoidRepr<T>", into = "EllipsoidRepr<T>")]
pub struct Ellipsoid<T: Real> {
    center: Vec<T>,
    shape: SymMatrix<T>,
    shape_inv: Matrix<T>,
    det: T,
    /// Smallest and largest semi-axis.
    axes: (T, T),
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
struct EllipsoidRepr<T: Real> {
    center: Vec<T>,
    shape: SymMatrix<T>,
}

impl<T: Real> TryFrom<EllipsoidRepr<T>> for Ellipsoid<T> {
    type Error = Error;
    fn try_from(r: EllipsoidRepr<T>) -> Result<Self> {
        Ellipsoid::new(r.center, r.shape)
    }
}

impl<T: Real> From<Ellipsoid<T>> for EllipsoidRepr<T> {
    fn from(e: Ellipsoid<T>) -> Self {
        EllipsoidRepr {
            center: e.center,
            shape: e.shape,
        }
    }
}

impl<T: Real> Ellipsoid<T> {
    pub fn new(center: Vec<T>, shape: SymMatrix<T>) -> Result<Self> {
        if center.len() != shape.n() {
            return Err(Error::DimensionMismatch {
                expected: shape.n(),
                got: center.len(),
            });
        }
        let e = eig_sym(&shape)?;
        if !(e.min() > T::zero()) {
            return Err(Error::NotPositiveDefinite {
                eigenvalue: e.min().as_f64(),
            });
        }
        let shape_inv = e.map(|w| T::one() / w).into_matrix();
        let det = e.values.iter().fold(T::one(), |d, &w| d * w);
        Ok(Ellipsoid {
            center,
            shape,
            shape_inv,
            det,
            axes: (e.min(), e.max()),
        })
    }

    /// `E_x = x + ε A^{1/2} 𝔹`.
    pub fn from_coefficient(center: Vec<T>, a: &SymMatrix<T>, eps: T) -> Result<Self> {
        Self::new(center, principal_sqrt(a)?.scale(eps))
    }

    pub fn unit_ball(n: usize) -> Self {
        Self::new(vec![T::zero(); n], SymMatrix::identity(n)).expect("identity shape")
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[T] {
        &self.center
    }

    pub fn shape(&self) -> &SymMatrix<T> {
        &self.shape
    }

    pub fn shape_det(&self) -> T {
        self.det
    }

    pub fn semi_axes(&self) -> (T, T) {
        self.axes
    }

    pub fn volume(&self) -> T {
        T::lit(unit_ball_volume(self.dim())) * self.det
    }

    /// Coordinates in the reference ball, `S^{-1}(y − c)`.
    pub fn to_ball(&self, y: &[T]) -> Vec<T> {
        self.shape_inv.mul_vec(&vec::sub(y, &self.center))
    }

    pub fn from_ball(&self, u: &[T]) -> Vec<T> {
        vec::add(&self.center, &self.shape.mul_vec(u))
    }

    /// `(y − c)ᵀ (S Sᵀ)^{-1} (y − c)`.
    pub fn gauge(&self, y: &[T]) -> T {
        let u = self.to_ball(y);
        vec::dot(&u, &u)
    }

    pub fn contains(&self, y: &[T]) -> bool {
        self.gauge(y) <= T::one()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        let u = sample_unit_ball::<T, _>(self.dim(), rng);
        self.from_ball(&u)
    }

    /// Sufficient test for empty intersection via bounding balls.
    pub fn certainly_disjoint(&self, other: &Ellipsoid<T>) -> bool {
        vec::norm(&vec::sub(&self.center, &other.center)) > self.axes.1 + other.axes.1
    }
}

/// Monte Carlo estimate of `|E1 ∩ E2| / |E1|`.
pub fn overlap_fraction<T: Real, R: Rng + ?Sized>(
    e1: &Ellipsoid<T>,
    e2: &Ellipsoid<T>,
    samples: usize,
    rng: &mut R,
) -> Result<Estimate> {
    if e1.dim() != e2.dim() {
        return Err(Error::DimensionMismatch {
            expected: e1.dim(),
            got: e2.dim(),
        });
    }
    if samples < 10_000 {
        return Err(Error::param("samples", "at least 10^4 samples are required"));
    }
    if e1.certainly_disjoint(e2) {
        return Ok(Estimate::exact(0.0));
    }
    let stats: RunningStats = (0..samples)
        .map(|_| if e2.contains(&e1.sample(rng)) { 1.0 } else { 0.0 })
        .collect();
    Ok(stats.estimate())
}

/// The open set `Ω` on which the process runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain<T: Real> {
    Ball { center: Vec<T>, radius: T },
    Box { lo: Vec<T>, hi: Vec<T> },
}

impl<T: Real> Domain<T> {
    pub fn ball(center: Vec<T>, radius: T) -> Result<Self> {
        if !(radius > T::zero()) {
            return Err(Error::param("radius", "must be positive"));
        }
        Ok(Domain::Ball { center, radius })
    }

    pub fn cube(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::param("box", "lo must be below hi in every coordinate"));
        }
        Ok(Domain::Box { lo, hi })
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Ball { center, .. } => center.len(),
            Domain::Box { lo, .. } => lo.len(),
        }
    }

    /// Membership in the open set.
    pub fn contains(&self, x: &[T]) -> bool {
        match self {
            Domain::Ball { center, radius } => {
                let d2: T = x.iter().zip(center).map(|(&a, &c)| (a - c) * (a - c)).sum();
                d2 < *radius * *radius
            }
            Domain::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(&v, (&l, &h))| l < v && v < h),
        }
    }

    /// Axis-aligned bounding box.
    pub fn bounds(&self) -> (Vec<T>, Vec<T>) {
        match self {
            Domain::Ball { center, radius } => (
                center.iter().map(|&c| c - *radius).collect(),
                center.iter().map(|&c| c + *radius).collect(),
            ),
            Domain::Box { lo, hi } => (lo.clone(), hi.clone()),
        }
    }

    /// A reference point of the domain (centre of the ball or box).
    pub fn center(&self) -> Vec<T> {
        match self {
            Domain::Ball { center, .. } => center.clone(),
            Domain::Box { lo, hi } => lo.iter().zip(hi).map(|(&a, &b)| (a + b) * T::lit(0.5)).collect(),
        }
    }
}

/// Width `√Λ ε` of the outer strip reachable in one step from `Ω`.
pub fn collar_width<T: Real>(big_lambda: T, eps: T) -> T {
    big_lambda.sqrt() * eps
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-14);
        assert!((unit_ball_volume(4) - std::f64::consts::PI.powi(2) / 2.0).abs() < 1e-14);
        assert_eq!(unit_ball_volume(1), 2.0);
    }

    #[test]
    fn samples_stay_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let shape = SymMatrix::from_rows(&[vec![2.0_f64, 0.5], vec![0.5, 1.0]]).unwrap();
        let e = Ellipsoid::new(vec![1.0, -1.0], shape).unwrap();
        for _ in 0..2000 {
            let y = e.sample(&mut rng);
            assert!(e.gauge(&y) < 1.0);
        }
        assert!((e.volume() - std::f64::consts::PI * 1.75).abs() < 1e-12);
    }

    #[test]
    fn overlap_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let e = Ellipsoid::<f64>::unit_ball(2);
        let est = overlap_fraction(&e, &e, 10_000, &mut rng).unwrap();
        assert_eq!(est.mean, 1.0);
        let far = Ellipsoid::new(vec![5.0, 0.0], SymMatrix::identity(2)).unwrap();
        let est = overlap_fraction(&e, &far, 10_000, &mut rng).unwrap();
        assert_eq!(est.mean, 0.0);
        assert!(overlap_fraction(&e, &far, 10, &mut rng).is_err());
    }

    #[test]
    fn domain_membership() {
        let d = Domain::ball(vec![0.0_f64, 0.0], 1.0).unwrap();
        assert!(d.contains(&[0.5, 0.5]));
        assert!(!d.contains(&[1.0, 0.0]));
        let b = Domain::cube(vec![0.0_f64, 0.0], vec![1.0, 2.0]).unwrap();
        assert!(b.contains(&[0.5, 1.5]));
        assert!(!b.contains(&[0.0, 1.0]));
        assert!(Domain::cube(vec![0.0_f64], vec![0.0]).is_err());
    }
}
