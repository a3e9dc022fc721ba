//! Nearest orthogonal matrix and the maximal trace `max_Q trace(M Q)`.

use crate::error::{Error, Result};
use crate::matcore::eigen::eig_sym;
use crate::matcore::matrix::{vec, Matrix, OrthoMatrix, SymMatrix};
use crate::scalar::Real;

/// Below this `|det M|` the closed form is replaced by the SVD construction.
pub const SINGULAR_DET: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Polar<T: Real> {
    /// Maximizer of `Q ↦ trace(M Q)` over `O(n)`.
    pub q0: OrthoMatrix<T>,
    /// `trace((MᵀM)^{1/2})`, the sum of the singular values of `M`.
    pub value: T,
}

/// Returns `Q0 = (MᵀM)^{-1/2} Mᵀ` together with `trace((MᵀM)^{1/2})`.
///
/// For `|det M| ≤ 1e-12` the maximizer is not unique; one is built from a
/// singular value decomposition `M = U S Vᵀ` as `Q0 = V Uᵀ`.
pub fn polar_orthogonal<T: Real>(m: &Matrix<T>) -> Result<Polar<T>> {
    let n = m.n();
    let mtm = SymMatrix::symmetrize(&m.transpose().matmul(m));
    let e = eig_sym(&mtm)?;
    let sigma: Vec<T> = e.values.iter().map(|&w| w.max(T::zero()).sqrt()).collect();
    let value: T = sigma.iter().copied().sum();

    if m.determinant().abs().as_f64() > SINGULAR_DET {
        let inv_sqrt = e.map(|w| T::one() / w.sqrt());
        let mut x = inv_sqrt.matmul(&m.transpose());
        // Newton polar steps X ← (X + X^{-T})/2 remove the round-off left by
        // the eigen route; convergence is quadratic from this start.
        for _ in 0..3 {
            if x.orthogonality_defect() <= T::epsilon() * T::lit(8.0 * n as f64) {
                break;
            }
            let inv_t = x.inverse()?.transpose();
            x = x.add(&inv_t).scale(T::lit(0.5));
        }
        return Ok(Polar {
            q0: OrthoMatrix::new(x)?,
            value,
        });
    }

    // SVD route. Columns of V are eigenvectors of MᵀM (ascending), so the
    // reliable left vectors u_i = M v_i / σ_i sit at the high end.
    let v = e.vectors.as_matrix();
    let cutoff = T::tol(1e-10) * sigma[n - 1].max(T::one());
    let mut u_cols: Vec<Option<Vec<T>>> = vec![None; n];
    for j in (0..n).rev() {
        if sigma[j] > cutoff {
            let col = m.mul_vec(&v.column(j));
            u_cols[j] = Some(vec::scale(&col, T::one() / sigma[j]));
        }
    }
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(n);
    for j in (0..n).rev() {
        if let Some(u) = &u_cols[j] {
            let w = orthogonalize(u, &basis).ok_or(Error::Singular)?;
            basis.push(w);
        }
    }
    let mut k = 0;
    while basis.len() < n {
        if k >= n {
            return Err(Error::Singular);
        }
        if let Some(w) = orthogonalize(&vec::unit(n, k), &basis) {
            basis.push(w);
        }
        k += 1;
    }
    // basis[0] belongs to the largest singular value, so reverse back to the
    // ascending order of V's columns.
    basis.reverse();
    let u = Matrix::from_fn(n, |i, j| basis[j][i]);
    let q0 = v.matmul(&u.transpose());
    Ok(Polar {
        q0: OrthoMatrix::new(q0)?,
        value,
    })
}

/// Gram–Schmidt against an orthonormal set (two passes). `None` if `x` is
/// numerically in their span.
fn orthogonalize<T: Real>(x: &[T], basis: &[Vec<T>]) -> Option<Vec<T>> {
    let mut w = x.to_vec();
    for _ in 0..2 {
        for b in basis {
            let d = vec::dot(&w, b);
            for (wi, &bi) in w.iter_mut().zip(b) {
                *wi -= d * bi;
            }
        }
    }
    let nw = vec::norm(&w);
    if nw <= T::tol(1e-8) * vec::norm(x).max(T::one()) {
        return None;
    }
    Some(vec::scale(&w, T::one() / nw))
}

pub(crate) fn gram_schmidt_columns<T: Real>(g: &Matrix<T>) -> Option<Matrix<T>> {
    let n = g.n();
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(n);
    for j in 0..n {
        basis.push(orthogonalize(&g.column(j), &basis)?);
    }
    Some(Matrix::from_fn(n, |i, j| basis[j][i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_diagonal() {
        let p = polar_orthogonal(&Matrix::<f64>::identity(2)).unwrap();
        assert!(p.q0.sub(&Matrix::identity(2)).max_abs() < 1e-15);
        assert!((p.value - 2.0).abs() < 1e-15);

        let p = polar_orthogonal(&Matrix::diag(&[3.0_f64, -4.0])).unwrap();
        assert!(p.q0.sub(&Matrix::diag(&[1.0, -1.0])).max_abs() < 1e-14);
        assert!((p.value - 7.0).abs() < 1e-13);
    }

    #[test]
    fn diagonal_value_beats_dense_angle_sweep() {
        // every 2×2 orthogonal matrix is a rotation or a reflection at some angle
        let m = Matrix::diag(&[3.0_f64, -4.0]);
        let p = polar_orthogonal(&m).unwrap();
        let mut best = f64::NEG_INFINITY;
        let steps = 62_832;
        for k in 0..steps {
            let t = k as f64 * 1e-4;
            let (s, c) = t.sin_cos();
            let rot = Matrix::from_rows(&[vec![c, -s], vec![s, c]]).unwrap();
            let refl = Matrix::from_rows(&[vec![c, s], vec![s, -c]]).unwrap();
            best = best.max(m.trace_of_product(&rot)).max(m.trace_of_product(&refl));
        }
        assert!(best <= p.value + 1e-12);
        assert!(p.value - best < 1e-6);
    }

    #[test]
    fn singular_fallback() {
        let m = Matrix::from_rows(&[vec![1.0_f64, 2.0], vec![2.0, 4.0]]).unwrap();
        let p = polar_orthogonal(&m).unwrap();
        assert!((m.trace_of_product(&p.q0) - p.value).abs() < 1e-12);
        assert!((p.value - 5.0).abs() < 1e-12);

        let z = Matrix::<f64>::zeros(3);
        let p = polar_orthogonal(&z).unwrap();
        assert_eq!(p.value, 0.0);
        assert!(p.q0.orthogonality_defect() < 1e-12);

        let m = Matrix::from_rows(&[
            vec![1.0_f64, 0.0, 0.0],
            vec![0.0, -2.0, 0.0],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        let p = polar_orthogonal(&m).unwrap();
        assert!((m.trace_of_product(&p.q0) - 3.0).abs() < 1e-12);
    }
}
