//! Haar-distributed orthogonal matrices and random elliptic matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matcore::matrix::{Matrix, OrthoMatrix, SymMatrix};
use crate::matcore::polar::gram_schmidt_columns;
use crate::matcore::EllipticityClass;
use crate::scalar::Real;

pub fn gaussian_matrix<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Matrix<T> {
    Matrix::from_fn(n, |_, _| T::lit(rng.sample::<f64, _>(StandardNormal)))
}

/// Haar sample: QR of a Gaussian matrix with `R` carrying a positive diagonal,
/// which is what Gram–Schmidt on the columns produces.
pub fn haar_orthogonal<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> OrthoMatrix<T> {
    loop {
        let g = gaussian_matrix::<f64, _>(n, rng);
        if let Some(q) = gram_schmidt_columns(&g) {
            return OrthoMatrix::new_unchecked(q.cast());
        }
    }
}

/// Deterministic Haar sample for a seed.
pub fn random_orthogonal<T: Real>(n: usize, seed: u64) -> OrthoMatrix<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    haar_orthogonal(n, &mut rng)
}

/// `R · diag(w) · Rᵀ` with Haar `R` and eigenvalues uniform in `[λ, Λ]`;
/// the extreme eigenvalues are pinned to `λ` and `Λ` when `pin_extremes`.
pub fn random_in_class<T: Real, R: Rng + ?Sized>(
    cls: &EllipticityClass<T>,
    pin_extremes: bool,
    rng: &mut R,
) -> SymMatrix<T> {
    let n = cls.n;
    let lo = cls.lambda.as_f64();
    let hi = cls.big_lambda.as_f64();
    let mut w: Vec<T> = (0..n)
        .map(|_| T::lit(if hi > lo { rng.random_range(lo..=hi) } else { lo }))
        .collect();
    if pin_extremes && n >= 2 {
        w[0] = cls.lambda;
        w[n - 1] = cls.big_lambda;
    }
    let q = haar_orthogonal::<T, _>(n, rng);
    q.conjugate_diag(&w)
}

/// Random symmetric positive definite matrix with eigenvalues in `[lo, hi]`.
pub fn random_spd<T: Real, R: Rng + ?Sized>(n: usize, lo: f64, hi: f64, rng: &mut R) -> SymMatrix<T> {
    let cls = EllipticityClass::new(n, T::lit(lo), T::lit(hi)).expect("valid bounds");
    random_in_class(&cls, false, rng)
}
