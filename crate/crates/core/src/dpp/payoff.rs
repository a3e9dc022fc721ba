use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{vec, Matrix, SymMatrix};
use crate::scalar::Real;

pub type PayoffFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

/// Boundary data `F`, defined on all of `ℝⁿ`.
#[derive(Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Payoff<T: Real> {
    Constant { value: T },
    /// `gᵀy + c`.
    Affine { gradient: Vec<T>, offset: T },
    /// `½ yᵀHy + gᵀy + c`.
    Quadratic {
        hessian: SymMatrix<T>,
        gradient: Vec<T>,
        offset: T,
    },
    #[serde(skip)]
    Custom(PayoffFn<T>),
}

impl<T: Real> fmt::Debug for Payoff<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payoff::Constant { value } => f.debug_struct("Constant").field("value", value).finish(),
            Payoff::Affine { gradient, offset } => f
                .debug_struct("Affine")
                .field("gradient", gradient)
                .field("offset", offset)
                .finish(),
            Payoff::Quadratic {
                hessian,
                gradient,
                offset,
            } => f
                .debug_struct("Quadratic")
                .field("hessian", hessian)
                .field("gradient", gradient)
                .field("offset", offset)
                .finish(),
            Payoff::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl<T: Real> Payoff<T> {
    pub fn custom(f: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Self {
        Payoff::Custom(Arc::new(f))
    }

    /// Checks that the payoff's vectors and matrices have dimension `n`.
    pub fn check_dim(&self, n: usize) -> Result<()> {
        let got = match self {
            Payoff::Affine { gradient, .. } => gradient.len(),
            Payoff::Quadratic { hessian, gradient, .. } => {
                if hessian.n() != gradient.len() {
                    return Err(Error::DimensionMismatch {
                        expected: gradient.len(),
                        got: hessian.n(),
                    });
                }
                gradient.len()
            }
            _ => n,
        };
        if got != n {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
        Ok(())
    }

    pub fn eval(&self, y: &[T]) -> T {
        match self {
            Payoff::Constant { value } => *value,
            Payoff::Affine { gradient, offset } => vec::dot(gradient, y) + *offset,
            Payoff::Quadratic {
                hessian,
                gradient,
                offset,
            } => T::lit(0.5) * vec::dot(y, &hessian.mul_vec(y)) + vec::dot(gradient, y) + *offset,
            Payoff::Custom(f) => f(y),
        }
    }

    /// `D²F`, when known in closed form.
    pub fn hessian(&self, n: usize) -> Option<Matrix<T>> {
        match self {
            Payoff::Constant { .. } | Payoff::Affine { .. } => Some(Matrix::zeros(n)),
            Payoff::Quadratic { hessian, .. } => Some(hessian.as_matrix().clone()),
            Payoff::Custom(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_evaluation() {
        let f = Payoff::Quadratic {
            hessian: SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(),
            gradient: vec![1.0, 0.0],
            offset: 2.0,
        };
        assert_eq!(f.eval(&[3.0, 4.0]), 12.0 + 3.0 + 2.0);
        assert!(f.check_dim(2).is_ok());
        assert!(f.check_dim(3).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let f: Payoff<f64> = Payoff::Affine {
            gradient: vec![1.0, -2.0],
            offset: 0.5,
        };
        let s = serde_json::to_string(&f).unwrap();
        let g: Payoff<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(g.eval(&[1.0, 1.0]), -0.5);
    }
}
