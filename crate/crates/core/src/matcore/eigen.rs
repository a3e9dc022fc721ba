//! Cyclic Jacobi eigensolver and the functions of a symmetric matrix built on it.

use crate::error::{Error, Result};
use crate::matcore::matrix::{Matrix, OrthoMatrix, SymMatrix};
use crate::scalar::Real;

/// Sweep cap for the cyclic Jacobi iteration.
pub const MAX_SWEEPS: usize = 100;

/// Spectral decomposition `A = R · diag(values) · Rᵀ`, eigenvalues ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigen<T: Real> {
    pub values: Vec<T>,
    pub vectors: OrthoMatrix<T>,
}

impl<T: Real> Eigen<T> {
    pub fn min(&self) -> T {
        self.values[0]
    }

    pub fn max(&self) -> T {
        self.values[self.values.len() - 1]
    }

    /// `R · diag(g(w)) · Rᵀ`.
    pub fn map(&self, g: impl Fn(T) -> T) -> SymMatrix<T> {
        let d: Vec<T> = self.values.iter().map(|&w| g(w)).collect();
        self.vectors.conjugate_diag(&d)
    }
}

fn off_diagonal_norm<T: Real>(a: &Matrix<T>) -> T {
    let n = a.n();
    let mut s = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn eig_sym<T: Real>(a: &SymMatrix<T>) -> Result<Eigen<T>> {
    eig_sym_with_cap(a, MAX_SWEEPS)
}

pub fn eig_sym_with_cap<T: Real>(a: &SymMatrix<T>, max_sweeps: usize) -> Result<Eigen<T>> {
    let n = a.n();
    let mut m = a.as_matrix().clone();
    let mut v = Matrix::<T>::identity(n);
    let scale = m.frobenius_norm();
    if !scale.is_finite() {
        return Err(Error::param("matrix", "entries must be finite"));
    }
    let target = T::epsilon() * scale;
    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&m);
        if off <= target || off == T::zero() {
            break;
        }
        if sweeps == max_sweeps {
            return Err(Error::NoConvergence {
                sweeps,
                off_norm: off.as_f64(),
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (apq + apq);
                let t = if theta.is_infinite() {
                    T::zero()
                } else {
                    let sgn = if theta >= T::zero() { T::one() } else { -T::one() };
                    sgn / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                // A ← Jᵀ A J with J the rotation in the (p, q) plane
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
                m[(p, q)] = T::zero();
                m[(q, p)] = T::zero();
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].partial_cmp(&m[(j, j)]).unwrap());
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, |i, j| v[(i, order[j])]);
    Ok(Eigen {
        values,
        vectors: OrthoMatrix::new_unchecked(vectors),
    })
}

/// Eigenvalues clamped at zero when they are negative only by round-off,
/// i.e. above `−1e-12 · max(1, λ_max)`.
fn clamped_psd<T: Real>(a: &SymMatrix<T>) -> Result<Eigen<T>> {
    let mut e = eig_sym(a)?;
    let floor = T::tol(1e-12) * e.max().abs().max(T::one());
    if e.min() < -floor {
        return Err(Error::NotPositiveSemidefinite {
            eigenvalue: e.min().as_f64(),
        });
    }
    for w in e.values.iter_mut() {
        if *w < T::zero() {
            *w = T::zero();
        }
    }
    Ok(e)
}

/// Principal square root of a symmetric positive semidefinite matrix.
pub fn principal_sqrt<T: Real>(a: &SymMatrix<T>) -> Result<SymMatrix<T>> {
    Ok(clamped_psd(a)?.map(|w| w.sqrt()))
}

/// `A^{-1/2}` for symmetric positive definite `A`.
pub fn inverse_sqrt<T: Real>(a: &SymMatrix<T>) -> Result<SymMatrix<T>> {
    let e = eig_sym(a)?;
    if !(e.min() > T::zero()) {
        return Err(Error::NotPositiveDefinite {
            eigenvalue: e.min().as_f64(),
        });
    }
    Ok(e.map(|w| T::one() / w.sqrt()))
}

/// Both `A^{1/2}` and `A^{-1/2}` from one decomposition.
pub fn sqrt_pair<T: Real>(a: &SymMatrix<T>) -> Result<(SymMatrix<T>, SymMatrix<T>)> {
    let e = eig_sym(a)?;
    if !(e.min() > T::zero()) {
        return Err(Error::NotPositiveDefinite {
            eigenvalue: e.min().as_f64(),
        });
    }
    Ok((e.map(|w| w.sqrt()), e.map(|w| T::one() / w.sqrt())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_matrix() -> SymMatrix<f64> {
        SymMatrix::from_rows(&[vec![5.0, -12.0], vec![-12.0, 29.0]]).unwrap()
    }

    #[test]
    fn eigenvalues_match_quadratic_formula() {
        let e = eig_sym(&example_matrix()).unwrap();
        // λ² − 34λ + 1 = 0
        let disc = (34.0_f64 * 34.0 - 4.0).sqrt();
        let lo = (34.0 - disc) / 2.0;
        let hi = (34.0 + disc) / 2.0;
        assert!((e.values[0] - lo).abs() < 1e-12);
        assert!((e.values[1] - hi).abs() < 1e-12);
        // trace 34 and determinant 1 give 17 ± 12√2
        assert!((lo - (17.0 - 12.0 * 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn diagonal_is_sorted() {
        let e = eig_sym(&SymMatrix::diag(&[8.0_f64, 2.0])).unwrap();
        assert_eq!(e.values, vec![2.0, 8.0]);
        let e = eig_sym(&SymMatrix::<f64>::identity(2)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);
    }

    #[test]
    fn sqrt_of_example_matrices() {
        let r = principal_sqrt(&example_matrix()).unwrap();
        let expect = Matrix::from_rows(&[vec![1.0, -2.0], vec![-2.0, 5.0]]).unwrap();
        assert!(r.sub(&expect).max_abs() < 1e-12);

        let d = 4.0_f64;
        let a = SymMatrix::from_rows(&[vec![d + 1.0, d - 1.0], vec![d - 1.0, d + 1.0]]).unwrap();
        let s = 0.5_f64.sqrt();
        let expect = Matrix::from_rows(&[
            vec![s * (d.sqrt() + 1.0), s * (d.sqrt() - 1.0)],
            vec![s * (d.sqrt() - 1.0), s * (d.sqrt() + 1.0)],
        ])
        .unwrap();
        assert!(principal_sqrt(&a).unwrap().sub(&expect).max_abs() < 1e-12);
    }

    #[test]
    fn negative_definite_rejected() {
        let a = SymMatrix::diag(&[1.0_f64, -0.5]);
        assert!(matches!(principal_sqrt(&a), Err(Error::NotPositiveSemidefinite { .. })));
        // round-off level negatives are clamped
        let a = SymMatrix::diag(&[1.0_f64, -1e-15]);
        assert_eq!(principal_sqrt(&a).unwrap()[(1, 1)], 0.0);
    }

    #[test]
    fn sweep_cap_reports_no_convergence() {
        let a = SymMatrix::from_rows(&[
            vec![1.0_f64, 0.3, 0.2],
            vec![0.3, 2.0, 0.1],
            vec![0.2, 0.1, 3.0],
        ])
        .unwrap();
        assert!(matches!(eig_sym_with_cap(&a, 0), Err(Error::NoConvergence { sweeps: 0, .. })));
    }

    #[test]
    fn works_in_single_precision() {
        let a = SymMatrix::from_rows(&[vec![5.0_f32, -12.0], vec![-12.0, 29.0]]).unwrap();
        let r = principal_sqrt(&a).unwrap();
        assert!((r[(0, 1)] + 2.0).abs() < 1e-4);
    }
}
