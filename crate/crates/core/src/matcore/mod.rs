//! Dense numerics for small symmetric matrices.

pub mod eigen;
pub mod matrix;
pub mod polar;
pub mod random;

use serde::{Deserialize, Serialize};

pub use eigen::{eig_sym, inverse_sqrt, principal_sqrt, sqrt_pair, Eigen};
pub use matrix::{vec, Matrix, OrthoMatrix, SymMatrix};
pub use polar::{polar_orthogonal, Polar};
pub use random::{haar_orthogonal, random_in_class, random_orthogonal, random_spd};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Slack applied to eigenvalue bounds in [`in_class`].
pub const CLASS_SLACK: f64 = 1e-12;

/// The set `A(λ, Λ)` of symmetric `n × n` matrices with spectrum in `[λ, Λ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct EllipticityClass<T> {
    pub n: usize,
    pub lambda: T,
    #[serde(rename = "Lambda")]
    pub big_lambda: T,
}

impl<T: Real> EllipticityClass<T> {
    pub fn new(n: usize, lambda: T, big_lambda: T) -> Result<Self> {
        if n < 1 {
            return Err(Error::param("n", "dimension must be positive"));
        }
        if !(lambda > T::zero() && lambda.is_finite()) {
            return Err(Error::param("lambda", "must be positive and finite"));
        }
        if !(big_lambda >= lambda && big_lambda.is_finite()) {
            return Err(Error::param("Lambda", "must be finite and at least lambda"));
        }
        Ok(EllipticityClass {
            n,
            lambda,
            big_lambda,
        })
    }

    /// `Λ / λ`.
    pub fn distortion(&self) -> T {
        self.big_lambda / self.lambda
    }

    pub fn contains(&self, a: &SymMatrix<T>) -> Result<bool> {
        in_class(a, self)
    }
}

/// Whether every eigenvalue of `a` lies in `[λ − 1e-12, Λ + 1e-12]`.
pub fn in_class<T: Real>(a: &SymMatrix<T>, cls: &EllipticityClass<T>) -> Result<bool> {
    if a.n() != cls.n {
        return Err(Error::DimensionMismatch {
            expected: cls.n,
            got: a.n(),
        });
    }
    let e = eig_sym(a)?;
    let slack = T::tol(CLASS_SLACK);
    Ok(e.min() >= cls.lambda - slack && e.max() <= cls.big_lambda + slack)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_membership() {
        let cls = EllipticityClass::new(2, 2.0_f64, 8.0).unwrap();
        assert!(in_class(&SymMatrix::diag(&[2.0, 8.0]), &cls).unwrap());
        assert!(!in_class(&SymMatrix::diag(&[1.0, 1.0]), &cls).unwrap());
        let a = SymMatrix::from_rows(&[vec![5.0, -12.0], vec![-12.0, 29.0]]).unwrap();
        assert!(!in_class(&a, &cls).unwrap());
        assert!(in_class(&SymMatrix::identity(3), &cls).is_err());
        assert_eq!(cls.distortion(), 4.0);
    }

    #[test]
    fn class_validation() {
        assert!(EllipticityClass::new(2, 0.0_f64, 1.0).is_err());
        assert!(EllipticityClass::new(2, 2.0_f64, 1.0).is_err());
        assert!(EllipticityClass::new(2, 1.0_f64, f64::INFINITY).is_err());
    }
}
