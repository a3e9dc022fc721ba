//! Coefficient fields `x ↦ A(x)` with values in `A(λ, Λ)` and constant determinant.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::matcore::{in_class, principal_sqrt, EllipticityClass, Matrix, SymMatrix};
use crate::scalar::Real;

/// Relative tolerance of the constant-determinant constraint.
pub const DET_RTOL: f64 = 1e-9;

pub type CustomFn<T> = Arc<dyn Fn(&[T]) -> SymMatrix<T> + Send + Sync>;

/// Angle `θ(x)` of a rotating field.
#[derive(Debug, Clone, PartialEq)]
pub enum AngleProfile<T> {
    /// `θ = ω · x`.
    Linear { omega: Vec<T> },
    /// `θ = k · arg(x₁ + i x₂)`.
    Polar { winding: T },
}

impl<T: Real> AngleProfile<T> {
    pub fn angle(&self, x: &[T]) -> T {
        match self {
            AngleProfile::Linear { omega } => omega.iter().zip(x).map(|(&w, &xi)| w * xi).sum(),
            AngleProfile::Polar { winding } => *winding * x[1].atan2(x[0]),
        }
    }
}

#[derive(Clone)]
pub enum FieldKind<T: Real> {
    Constant(SymMatrix<T>),
    /// Parity of `Σ floor(x_i / cell)` selects `even` or `odd`.
    Checkerboard {
        cell: T,
        even: SymMatrix<T>,
        odd: SymMatrix<T>,
    },
    /// `R(θ(x)) diag(eigenvalues) R(θ(x))ᵀ`, rotating in the `(x₁, x₂)` plane.
    Rotating {
        eigenvalues: Vec<T>,
        profile: AngleProfile<T>,
    },
    Custom(CustomFn<T>),
}

impl<T: Real> fmt::Debug for FieldKind<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldKind::Constant(a) => f.debug_tuple("Constant").field(a).finish(),
            FieldKind::Checkerboard { cell, even, odd } => f
                .debug_struct("Checkerboard")
                .field("cell", cell)
                .field("even", even)
                .field("odd", odd)
                .finish(),
            FieldKind::Rotating { eigenvalues, profile } => f
                .debug_struct("Rotating")
                .field("eigenvalues", eigenvalues)
                .field("profile", profile)
                .finish(),
            FieldKind::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CoefficientField<T: Real> {
    cls: EllipticityClass<T>,
    kind: FieldKind<T>,
    det_target: T,
    /// Square roots of the piecewise constant values.
    roots: Vec<SymMatrix<T>>,
}

fn check_value<T: Real>(a: &SymMatrix<T>, cls: &EllipticityClass<T>, det_target: T) -> std::result::Result<(), String> {
    if a.n() != cls.n {
        return Err(format!("dimension {} does not match class dimension {}", a.n(), cls.n));
    }
    match in_class(a, cls) {
        Ok(true) => {}
        Ok(false) => return Err(format!("eigenvalues outside [{}, {}]", cls.lambda, cls.big_lambda)),
        Err(e) => return Err(e.to_string()),
    }
    let det = a.determinant();
    if (det - det_target).abs() > T::tol(DET_RTOL) * det_target.abs() {
        return Err(format!("determinant {det} differs from {det_target}"));
    }
    Ok(())
}

fn rotation_in_plane<T: Real>(n: usize, theta: T) -> Matrix<T> {
    let (s, c) = theta.sin_cos();
    let mut r = Matrix::identity(n);
    r[(0, 0)] = c;
    r[(0, 1)] = -s;
    r[(1, 0)] = s;
    r[(1, 1)] = c;
    r
}

impl<T: Real> CoefficientField<T> {
    pub fn constant(cls: EllipticityClass<T>, a: SymMatrix<T>) -> Result<Self> {
        let det = a.determinant();
        check_value(&a, &cls, det).map_err(|reason| Error::InvalidCoefficient { point: vec![], reason })?;
        let root = principal_sqrt(&a)?;
        Ok(CoefficientField {
            cls,
            kind: FieldKind::Constant(a),
            det_target: det,
            roots: vec![root],
        })
    }

    pub fn identity(n: usize) -> Self {
        let cls = EllipticityClass::new(n, T::one(), T::one()).expect("unit class");
        Self::constant(cls, SymMatrix::identity(n)).expect("identity is admissible")
    }

    pub fn checkerboard(cls: EllipticityClass<T>, cell: T, even: SymMatrix<T>, odd: SymMatrix<T>) -> Result<Self> {
        if !(cell > T::zero()) {
            return Err(Error::param("cell", "must be positive"));
        }
        let det = even.determinant();
        for a in [&even, &odd] {
            check_value(a, &cls, det).map_err(|reason| Error::InvalidCoefficient { point: vec![], reason })?;
        }
        let roots = vec![principal_sqrt(&even)?, principal_sqrt(&odd)?];
        Ok(CoefficientField {
            cls,
            kind: FieldKind::Checkerboard { cell, even, odd },
            det_target: det,
            roots,
        })
    }

    /// Checkerboard alternating `diag(λ, Λ, λ, …)` and `diag(Λ, λ, λ, …)`.
    pub fn checkerboard_axes(cls: EllipticityClass<T>, cell: T) -> Result<Self> {
        if cls.n < 2 {
            return Err(Error::UnsupportedDimension(cls.n));
        }
        let mut even = vec![cls.lambda; cls.n];
        let mut odd = vec![cls.lambda; cls.n];
        even[1] = cls.big_lambda;
        odd[0] = cls.big_lambda;
        Self::checkerboard(cls, cell, SymMatrix::diag(&even), SymMatrix::diag(&odd))
    }

    pub fn rotating(cls: EllipticityClass<T>, eigenvalues: Vec<T>, profile: AngleProfile<T>) -> Result<Self> {
        if cls.n < 2 {
            return Err(Error::UnsupportedDimension(cls.n));
        }
        if eigenvalues.len() != cls.n {
            return Err(Error::DimensionMismatch {
                expected: cls.n,
                got: eigenvalues.len(),
            });
        }
        if let AngleProfile::Linear { omega } = &profile {
            if omega.len() != cls.n {
                return Err(Error::DimensionMismatch {
                    expected: cls.n,
                    got: omega.len(),
                });
            }
        }
        let d = SymMatrix::diag(&eigenvalues);
        let det = d.determinant();
        check_value(&d, &cls, det).map_err(|reason| Error::InvalidCoefficient { point: vec![], reason })?;
        Ok(CoefficientField {
            cls,
            kind: FieldKind::Rotating { eigenvalues, profile },
            det_target: det,
            roots: vec![],
        })
    }

    /// Field given by a closure; every evaluation is validated against the
    /// class and `det_target`.
    pub fn custom(
        cls: EllipticityClass<T>,
        det_target: T,
        f: impl Fn(&[T]) -> SymMatrix<T> + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(det_target > T::zero()) {
            return Err(Error::param("det_target", "must be positive"));
        }
        Ok(CoefficientField {
            cls,
            kind: FieldKind::Custom(Arc::new(f)),
            det_target,
            roots: vec![],
        })
    }

    pub fn class(&self) -> &EllipticityClass<T> {
        &self.cls
    }

    pub fn kind(&self) -> &FieldKind<T> {
        &self.kind
    }

    pub fn det_target(&self) -> T {
        self.det_target
    }

    pub fn dim(&self) -> usize {
        self.cls.n
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, FieldKind::Constant(_))
    }

    fn parity(cell: T, x: &[T]) -> usize {
        let s: i64 = x.iter().map(|&xi| (xi / cell).floor().to_i64().unwrap_or(0)).sum();
        s.rem_euclid(2) as usize
    }

    /// `A(x)`.
    pub fn evaluate(&self, x: &[T]) -> Result<SymMatrix<T>> {
        if x.len() != self.cls.n {
            return Err(Error::DimensionMismatch {
                expected: self.cls.n,
                got: x.len(),
            });
        }
        match &self.kind {
            FieldKind::Constant(a) => Ok(a.clone()),
            FieldKind::Checkerboard { cell, even, odd } => Ok(if Self::parity(*cell, x) == 0 {
                even.clone()
            } else {
                odd.clone()
            }),
            FieldKind::Rotating { eigenvalues, profile } => {
                let r = rotation_in_plane(self.cls.n, profile.angle(x));
                Ok(SymMatrix::conjugate_diag(&r, eigenvalues))
            }
            FieldKind::Custom(f) => {
                let a = f(x);
                self.validate_at(x, &a)?;
                Ok(a)
            }
        }
    }

    fn validate_at(&self, x: &[T], a: &SymMatrix<T>) -> Result<()> {
        check_value(a, &self.cls, self.det_target).map_err(|reason| Error::InvalidCoefficient {
            point: x.iter().map(|v| v.as_f64()).collect(),
            reason,
        })
    }

    /// `A(x)^{1/2}`.
    pub fn sqrt_at(&self, x: &[T]) -> Result<SymMatrix<T>> {
        match &self.kind {
            FieldKind::Constant(_) => Ok(self.roots[0].clone()),
            FieldKind::Checkerboard { cell, .. } => Ok(self.roots[Self::parity(*cell, x)].clone()),
            FieldKind::Rotating { eigenvalues, profile } => {
                let r = rotation_in_plane(self.cls.n, profile.angle(x));
                let roots: Vec<T> = eigenvalues.iter().map(|w| w.sqrt()).collect();
                Ok(SymMatrix::conjugate_diag(&r, &roots))
            }
            FieldKind::Custom(_) => principal_sqrt(&self.evaluate(x)?),
        }
    }
}
