//! Weighted trace objectives and orthogonal couplings between two ellipsoids.
//!
//! Sign convention: an objective below zero means the coupling contracts the
//! separation direction more than it spreads the orthogonal ones, i.e. the
//! coupling is good.

pub mod thresholds;

use serde::{Deserialize, Serialize};

pub use thresholds::{
    continuity_margin, diagonal_objective, min_trace_bound, mirror_objective_bound, tau, thresholds,
    ContinuityMargin, Thresholds,
};

use crate::error::{Error, Result};
use crate::matcore::{inverse_sqrt, polar_orthogonal, principal_sqrt, vec, Matrix, OrthoMatrix, SymMatrix};
use crate::scalar::Real;

/// Reflection taking `e₁` to the unit vector along `direction`; the identity
/// when `direction` already points along `e₁`.
pub fn frame_for_direction<T: Real>(direction: &[T]) -> Result<OrthoMatrix<T>> {
    let d = vec::normalized(direction).ok_or_else(|| Error::param("direction", "must be a nonzero finite vector"))?;
    let n = d.len();
    let e1 = vec::unit::<T>(n, 0);
    let u = vec::sub(&e1, &d);
    if vec::norm(&u) <= T::epsilon() * T::lit(16.0) {
        return Ok(OrthoMatrix::identity(n));
    }
    Ok(OrthoMatrix::householder(&u).expect("nonzero reflection vector"))
}

/// `W = R · diag(α − 1, 1, …, 1) · Rᵀ` where `R e₁` is the coupling direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct WeightMatrix<T: Real> {
    alpha: T,
    frame: OrthoMatrix<T>,
    matrix: SymMatrix<T>,
}

impl<T: Real> WeightMatrix<T> {
    pub fn new(alpha: T, frame: OrthoMatrix<T>) -> Result<Self> {
        if !(alpha > T::zero() && alpha < T::one()) {
            return Err(Error::param("alpha", "must lie in (0, 1)"));
        }
        let n = frame.n();
        let mut d = vec![T::one(); n];
        d[0] = alpha - T::one();
        let matrix = frame.conjugate_diag(&d);
        Ok(WeightMatrix { alpha, frame, matrix })
    }

    /// Frame `I`, i.e. separation along `e₁`.
    pub fn standard(n: usize, alpha: T) -> Result<Self> {
        Self::new(alpha, OrthoMatrix::identity(n))
    }

    pub fn along(direction: &[T], alpha: T) -> Result<Self> {
        Self::new(alpha, frame_for_direction(direction)?)
    }

    pub fn n(&self) -> usize {
        self.frame.n()
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn frame(&self) -> &OrthoMatrix<T> {
        &self.frame
    }

    pub fn direction(&self) -> Vec<T> {
        self.frame.column(0)
    }

    pub fn matrix(&self) -> &SymMatrix<T> {
        &self.matrix
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct CouplingResult<T: Real> {
    pub q: OrthoMatrix<T>,
    pub objective: T,
    pub negative: bool,
}

fn check_dims<T: Real>(n: usize, mats: &[&Matrix<T>]) -> Result<()> {
    for m in mats {
        if m.n() != n {
            return Err(Error::DimensionMismatch { expected: n, got: m.n() });
        }
    }
    Ok(())
}

/// `trace(W (A₁ + A₂ − 2 A₂^{1/2} Q A₁^{1/2}))`.
pub fn trace_objective<T: Real>(
    a1: &SymMatrix<T>,
    a2: &SymMatrix<T>,
    q: &OrthoMatrix<T>,
    w: &WeightMatrix<T>,
) -> Result<T> {
    check_dims(w.n(), &[a1, a2, q])?;
    let s1 = principal_sqrt(a1)?;
    let s2 = principal_sqrt(a2)?;
    Ok(trace_objective_from_roots(&s1, &s2, q, w))
}

/// [`trace_objective`] for given roots `Sᵢ = Aᵢ^{1/2}`.
pub fn trace_objective_from_roots<T: Real>(
    s1: &SymMatrix<T>,
    s2: &SymMatrix<T>,
    q: &Matrix<T>,
    w: &WeightMatrix<T>,
) -> T {
    let wm = w.matrix();
    let a_sum = s1.matmul(s1).add(&s2.matmul(s2));
    let cross = s2.matmul(q).matmul(s1);
    wm.trace_of_product(&a_sum) - T::lit(2.0) * wm.trace_of_product(&cross)
}

/// Minimizer of [`trace_objective`] over `O(n)`: the orthogonal polar factor
/// of `Mᵀ` with `M = A₁^{1/2} W A₂^{1/2}`.
pub fn optimal_coupling<T: Real>(
    a1: &SymMatrix<T>,
    a2: &SymMatrix<T>,
    w: &WeightMatrix<T>,
) -> Result<CouplingResult<T>> {
    check_dims(w.n(), &[a1, a2])?;
    optimal_coupling_from_roots(&principal_sqrt(a1)?, &principal_sqrt(a2)?, w)
}

pub fn optimal_coupling_from_roots<T: Real>(
    s1: &SymMatrix<T>,
    s2: &SymMatrix<T>,
    w: &WeightMatrix<T>,
) -> Result<CouplingResult<T>> {
    check_dims(w.n(), &[s1, s2])?;
    let m = s1.matmul(w.matrix()).matmul(s2);
    let polar = polar_orthogonal(&m)?;
    let a_sum = s1.matmul(s1).add(&s2.matmul(s2));
    let objective = w.matrix().trace_of_product(&a_sum) - T::lit(2.0) * polar.value;
    Ok(CouplingResult {
        q: polar.q0,
        objective,
        negative: objective < T::zero(),
    })
}

/// Reflection across the hyperplane orthogonal to the coupling direction,
/// `R · diag(−1, 1, …, 1) · Rᵀ`.
pub fn mirror_coupling<T: Real>(w: &WeightMatrix<T>) -> OrthoMatrix<T> {
    let n = w.n();
    let mut d = vec![T::one(); n];
    d[0] = -T::one();
    OrthoMatrix::new_unchecked(w.frame().conjugate_diag(&d).into_matrix())
}

/// `trace(A^{1/2} W A^{1/2} (I − Q))`; the objective for `A₁ = A₂ = A` is
/// twice this value.
pub fn half_objective<T: Real>(a: &SymMatrix<T>, q: &OrthoMatrix<T>, w: &WeightMatrix<T>) -> Result<T> {
    check_dims(w.n(), &[a, q])?;
    let s = principal_sqrt(a)?;
    let m = s.matmul(w.matrix()).matmul(&s);
    let i_minus_q = Matrix::identity(w.n()).sub(q);
    Ok(m.trace_of_product(&i_minus_q))
}

/// Orthogonal `Q` with `Q ν̂₁ = −ν̂₂`, where `νᵢ = Aᵢ^{-1/2} d` and hats
/// denote normalization, built as `H₂ · diag(−1, I) · H₁` with `Hᵢ` the
/// reflection exchanging `ν̂ᵢ` and `e₁`.
pub fn medium_distance_coupling<T: Real>(
    a1: &SymMatrix<T>,
    a2: &SymMatrix<T>,
    direction: &[T],
) -> Result<OrthoMatrix<T>> {
    let n = a1.n();
    check_dims(n, &[a2])?;
    if direction.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: direction.len(),
        });
    }
    let nu1 = inverse_sqrt(a1)?.mul_vec(direction);
    let nu2 = inverse_sqrt(a2)?.mul_vec(direction);
    let h1 = frame_for_direction(&nu1)?;
    let h2 = frame_for_direction(&nu2)?;
    let flip = OrthoMatrix::first_axis_reflection(n);
    Ok(h2.compose(&flip).compose(&h1))
}

/// The vectors `νᵢ = Aᵢ^{-1/2} d`.
pub fn nu_vectors<T: Real>(a1: &SymMatrix<T>, a2: &SymMatrix<T>, direction: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    Ok((
        inverse_sqrt(a1)?.mul_vec(direction),
        inverse_sqrt(a2)?.mul_vec(direction),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::matcore::{haar_orthogonal, random_spd};

    fn example_matrix() -> SymMatrix<f64> {
        SymMatrix::from_rows(&[vec![5.0, -12.0], vec![-12.0, 29.0]]).unwrap()
    }

    #[test]
    fn identity_coupling_of_equal_matrices_vanishes() {
        let w = WeightMatrix::standard(2, 0.3).unwrap();
        let a = example_matrix();
        let v = trace_objective(&a, &a, &OrthoMatrix::identity(2), &w).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn mirror_objective_matches_direct_arithmetic() {
        // A^{1/2} = [[1,−2],[−2,5]]; A^{1/2} J_α A^{1/2} has (1,1) entry 3 + α
        for alpha in [0.1, 0.5, 0.9] {
            let w = WeightMatrix::standard(2, alpha).unwrap();
            let a = example_matrix();
            let j0 = mirror_coupling(&w);
            let full = trace_objective(&a, &a, &j0, &w).unwrap();
            assert!((full - 4.0 * (3.0 + alpha)).abs() < 1e-10);
            let half = half_objective(&a, &j0, &w).unwrap();
            assert!((half - 2.0 * (3.0 + alpha)).abs() < 1e-10);
        }
    }

    #[test]
    fn scalar_matrices_reach_constant_coefficient_bound() {
        for alpha in [0.1, 0.5, 0.9] {
            let w = WeightMatrix::standard(2, alpha).unwrap();
            let a = SymMatrix::diag(&[2.0_f64, 2.0]);
            let r = optimal_coupling(&a, &a, &w).unwrap();
            assert!((r.objective + 8.0 * (1.0 - alpha)).abs() < 1e-12);
            assert!(r.negative);
        }
    }

    #[test]
    fn optimal_beats_haar_samples_and_recomputes() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in 2..=4 {
            let a1 = random_spd::<f64, _>(n, 1.0, 2.0, &mut rng);
            let a2 = random_spd::<f64, _>(n, 1.0, 2.0, &mut rng);
            let dir: Vec<f64> = haar_orthogonal::<f64, _>(n, &mut rng).column(0);
            let w = WeightMatrix::along(&dir, 0.4).unwrap();
            let r = optimal_coupling(&a1, &a2, &w).unwrap();
            let again = trace_objective(&a1, &a2, &r.q, &w).unwrap();
            assert!((again - r.objective).abs() < 1e-9);
            for _ in 0..2000 {
                let q = haar_orthogonal(n, &mut rng);
                assert!(trace_objective(&a1, &a2, &q, &w).unwrap() >= r.objective - 1e-9);
            }
        }
    }

    #[test]
    fn frame_maps_e1_to_direction() {
        let d = [0.0, 3.0, 4.0];
        let f = frame_for_direction(&d).unwrap();
        let img = f.mul_vec(&[1.0, 0.0, 0.0]);
        assert!(vec::norm(&vec::sub(&img, &[0.0, 0.6, 0.8])) < 1e-15);
        assert_eq!(frame_for_direction(&[2.0, 0.0]).unwrap(), OrthoMatrix::identity(2));
        assert!(frame_for_direction(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn mirror_is_reflection() {
        let w = WeightMatrix::along(&[1.0_f64, 1.0, 0.0], 0.5).unwrap();
        let m = mirror_coupling(&w);
        assert!((m.determinant() + 1.0).abs() < 1e-14);
        let s = 0.5_f64.sqrt();
        let img = m.mul_vec(&[s, s, 0.0]);
        assert!(vec::norm(&vec::add(&img, &[s, s, 0.0])) < 1e-14);
        let w = WeightMatrix::standard(2, 0.5).unwrap();
        assert_eq!(mirror_coupling(&w).into_matrix(), Matrix::diag(&[-1.0, 1.0]));
    }

    #[test]
    fn medium_coupling_identity_case() {
        let i = SymMatrix::<f64>::identity(3);
        let q = medium_distance_coupling(&i, &i, &[1.0, 0.0, 0.0]).unwrap();
        assert!(q.sub(&Matrix::diag(&[-1.0, 1.0, 1.0])).max_abs() < 1e-15);
    }

    #[test]
    fn medium_coupling_defining_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in 2..=5 {
            let a1 = random_spd::<f64, _>(n, 1.0, 3.0, &mut rng);
            let a2 = random_spd::<f64, _>(n, 1.0, 3.0, &mut rng);
            let d = haar_orthogonal::<f64, _>(n, &mut rng).column(1);
            let q = medium_distance_coupling(&a1, &a2, &d).unwrap();
            let (nu1, nu2) = nu_vectors(&a1, &a2, &d).unwrap();
            let lhs = q.mul_vec(&vec::normalized(&nu1).unwrap());
            let r = vec::add(&lhs, &vec::normalized(&nu2).unwrap());
            assert!(vec::norm(&r) <= 1e-10);
            let ratio = vec::norm(&nu1) / vec::norm(&nu2);
            assert!(ratio >= 1.0 / 3f64.sqrt() - 1e-12 && ratio <= 3f64.sqrt() + 1e-12);
        }
    }

    #[test]
    fn generic_over_single_precision() {
        let w = WeightMatrix::<f32>::standard(2, 0.5).unwrap();
        let a = SymMatrix::diag(&[2.0_f32, 2.0]);
        let r = optimal_coupling(&a, &a, &w).unwrap();
        assert!((r.objective + 4.0).abs() < 1e-4);
    }
}
