//! Small dense square matrices and the symmetric / orthogonal newtypes.

use std::fmt;
use std::ops::{Deref, Index, IndexMut, Mul};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense `n × n` matrix stored row-major; serializes as a list of rows.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<T>>", into = "Vec<Vec<T>>")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Matrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn diag(d: &[T]) -> Self {
        Self::from_fn(d.len(), |i, j| if i == j { d[i] } else { T::zero() })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Matrix { n, data }
    }

    pub fn from_row_major(n: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        Ok(Matrix { n, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::param("rows", "matrix must have at least one row"));
        }
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { n, data })
    }

    /// Outer product `u vᵀ`.
    pub fn outer(u: &[T], v: &[T]) -> Self {
        assert_eq!(u.len(), v.len());
        Self::from_fn(u.len(), |i, j| u[i] * v[j])
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.n).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Matrix<T>) -> Self {
        assert_eq!(self.n, rhs.n, "matmul dimension mismatch");
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == T::zero() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.n);
        let mut out = vec![T::zero(); self.n];
        self.mul_vec_into(v, &mut out);
        out
    }

    #[inline]
    pub fn mul_vec_into(&self, v: &[T], out: &mut [T]) {
        let n = self.n;
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let row = &self.data[i * n..(i + 1) * n];
            *o = row.iter().zip(v).map(|(&a, &b)| a * b).sum();
        }
    }

    pub fn add(&self, rhs: &Matrix<T>) -> Self {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Matrix<T>) -> Self {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        Matrix {
            n: self.n,
            data: self.data.iter().map(|&a| a * s).collect(),
        }
    }

    fn zip_with(&self, rhs: &Matrix<T>, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        Matrix {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn trace(&self) -> T {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    /// `trace(self · rhs)` without forming the product.
    pub fn trace_of_product(&self, rhs: &Matrix<T>) -> T {
        let n = self.n;
        let mut acc = T::zero();
        for i in 0..n {
            for k in 0..n {
                acc += self.data[i * n + k] * rhs.data[k * n + i];
            }
        }
        acc
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&a| a * a).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &a| m.max(a.abs()))
    }

    /// `‖MᵀM − I‖_F`.
    pub fn orthogonality_defect(&self) -> T {
        self.transpose()
            .matmul(self)
            .sub(&Matrix::identity(self.n))
            .frobenius_norm()
    }

    /// Exact symmetry test (bitwise equality of mirrored entries).
    pub fn is_symmetric(&self) -> bool {
        self.first_asymmetry().is_none()
    }

    fn first_asymmetry(&self) -> Option<(usize, usize)> {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self[(i, j)] != self[(j, i)] {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// LU factorisation with partial pivoting. Returns the packed factors,
    /// the row permutation and the permutation sign, or `None` if singular.
    fn lu(&self) -> Option<(Vec<T>, Vec<usize>, T)> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = T::one();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, a[i * n + k].abs()))
                .fold((k, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot == T::zero() {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let akk = a[k * n + k];
            for i in (k + 1)..n {
                let f = a[i * n + k] / akk;
                a[i * n + k] = f;
                for j in (k + 1)..n {
                    let akj = a[k * n + j];
                    a[i * n + j] -= f * akj;
                }
            }
        }
        Some((a, perm, sign))
    }

    pub fn determinant(&self) -> T {
        match self.lu() {
            None => T::zero(),
            Some((lu, _, sign)) => (0..self.n).fold(sign, |d, i| d * lu[i * self.n + i]),
        }
    }

    pub fn inverse(&self) -> Result<Self> {
        let n = self.n;
        let (lu, perm, _) = self.lu().ok_or(Error::Singular)?;
        let mut inv = Matrix::zeros(n);
        for col in 0..n {
            // solve L U x = P e_col
            let mut x: Vec<T> = (0..n)
                .map(|i| if perm[i] == col { T::one() } else { T::zero() })
                .collect();
            for i in 0..n {
                for k in 0..i {
                    let l = lu[i * n + k];
                    x[i] = x[i] - l * x[k];
                }
            }
            for i in (0..n).rev() {
                for k in (i + 1)..n {
                    let u = lu[i * n + k];
                    x[i] = x[i] - u * x[k];
                }
                x[i] = x[i] / lu[i * n + i];
            }
            for i in 0..n {
                inv[(i, col)] = x[i];
            }
        }
        Ok(inv)
    }

    pub fn cast<U: Real>(&self) -> Matrix<U> {
        Matrix {
            n: self.n,
            data: self.data.iter().map(|&a| U::lit(a.as_f64())).collect(),
        }
    }
}

impl<T: Real> TryFrom<Vec<Vec<T>>> for Matrix<T> {
    type Error = Error;

    fn try_from(rows: Vec<Vec<T>>) -> Result<Self> {
        Matrix::from_rows(&rows)
    }
}

impl<T: Real> From<Matrix<T>> for Vec<Vec<T>> {
    fn from(m: Matrix<T>) -> Self {
        m.to_rows()
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

impl<T: Real> Mul for &Matrix<T> {
    type Output = Matrix<T>;
    fn mul(self, rhs: &Matrix<T>) -> Matrix<T> {
        self.matmul(rhs)
    }
}

impl<T: Real> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.to_rows()).finish()
    }
}

/// Symmetric matrix. Symmetry is exact: `a[i][j] == a[j][i]` bitwise.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix<T>", into = "Matrix<T>")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct SymMatrix<T: Real>(Matrix<T>);

impl<T: Real> SymMatrix<T> {
    pub fn new(m: Matrix<T>) -> Result<Self> {
        if m.n() < 1 {
            return Err(Error::param("n", "dimension must be positive"));
        }
        match m.first_asymmetry() {
            Some((row, col)) => Err(Error::NotSymmetric { row, col }),
            None => Ok(SymMatrix(m)),
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    /// Averages `m` with its transpose; used on products that are
    /// symmetric in exact arithmetic.
    pub fn symmetrize(m: &Matrix<T>) -> Self {
        let half = T::lit(0.5);
        SymMatrix(Matrix::from_fn(m.n(), |i, j| {
            if i == j {
                m[(i, i)]
            } else {
                (m[(i, j)] + m[(j, i)]) * half
            }
        }))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(Matrix::identity(n))
    }

    pub fn diag(d: &[T]) -> Self {
        SymMatrix(Matrix::diag(d))
    }

    /// `Q D Qᵀ` with `D = diag(d)`.
    pub fn conjugate_diag(q: &Matrix<T>, d: &[T]) -> Self {
        let n = q.n();
        assert_eq!(d.len(), n);
        let m = Matrix::from_fn(n, |i, j| (0..n).map(|k| q[(i, k)] * d[k] * q[(j, k)]).sum());
        Self::symmetrize(&m)
    }

    pub fn scale(&self, s: T) -> Self {
        SymMatrix(self.0.scale(s))
    }

    pub fn as_matrix(&self) -> &Matrix<T> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.0
    }

    pub fn cast<U: Real>(&self) -> SymMatrix<U> {
        SymMatrix(self.0.cast())
    }
}

impl<T: Real> Deref for SymMatrix<T> {
    type Target = Matrix<T>;
    fn deref(&self) -> &Matrix<T> {
        &self.0
    }
}

impl<T: Real> TryFrom<Matrix<T>> for SymMatrix<T> {
    type Error = Error;
    fn try_from(m: Matrix<T>) -> Result<Self> {
        SymMatrix::new(m)
    }
}

impl<T: Real> From<SymMatrix<T>> for Matrix<T> {
    fn from(s: SymMatrix<T>) -> Matrix<T> {
        s.0
    }
}

impl<T: Real> fmt::Debug for SymMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Orthogonal matrix, `‖QᵀQ − I‖_F ≤ 1e-10` (widened for `f32`).
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix<T>", into = "Matrix<T>")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct OrthoMatrix<T: Real>(Matrix<T>);

impl<T: Real> OrthoMatrix<T> {
    pub fn tolerance() -> T {
        T::tol(1e-10)
    }

    pub fn new(m: Matrix<T>) -> Result<Self> {
        let defect = m.orthogonality_defect();
        if !(defect <= Self::tolerance()) {
            return Err(Error::NotOrthogonal {
                defect: defect.as_f64(),
            });
        }
        Ok(OrthoMatrix(m))
    }

    pub(crate) fn new_unchecked(m: Matrix<T>) -> Self {
        debug_assert!(m.orthogonality_defect() <= Self::tolerance() * T::lit(10.0));
        OrthoMatrix(m)
    }

    pub fn identity(n: usize) -> Self {
        OrthoMatrix(Matrix::identity(n))
    }

    /// Diagonal sign matrix `diag(±1, …)`.
    pub fn signs(s: &[T]) -> Result<Self> {
        if s.iter().any(|&v| v != T::one() && v != -T::one()) {
            return Err(Error::param("signs", "entries must be ±1"));
        }
        Ok(OrthoMatrix(Matrix::diag(s)))
    }

    /// `diag(−1, 1, …, 1)`, the reflection of the first coordinate.
    pub fn first_axis_reflection(n: usize) -> Self {
        let mut m = Matrix::identity(n);
        m[(0, 0)] = -T::one();
        OrthoMatrix(m)
    }

    /// Householder reflection `I − 2uuᵀ/|u|²`. Returns `None` for a zero vector.
    pub fn householder(u: &[T]) -> Option<Self> {
        let norm2: T = u.iter().map(|&a| a * a).sum();
        if norm2 == T::zero() {
            return None;
        }
        let two = T::lit(2.0);
        let n = u.len();
        Some(OrthoMatrix(Matrix::from_fn(n, |i, j| {
            let id = if i == j { T::one() } else { T::zero() };
            id - two * u[i] * u[j] / norm2
        })))
    }

    pub fn transpose(&self) -> Self {
        OrthoMatrix(self.0.transpose())
    }

    pub fn compose(&self, rhs: &OrthoMatrix<T>) -> Self {
        OrthoMatrix(self.0.matmul(&rhs.0))
    }

    /// `self · D · selfᵀ` for `D = diag(d)`.
    pub fn conjugate_diag(&self, d: &[T]) -> SymMatrix<T> {
        SymMatrix::conjugate_diag(&self.0, d)
    }

    pub fn as_matrix(&self) -> &Matrix<T> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.0
    }
}

impl<T: Real> Deref for OrthoMatrix<T> {
    type Target = Matrix<T>;
    fn deref(&self) -> &Matrix<T> {
        &self.0
    }
}

impl<T: Real> TryFrom<Matrix<T>> for OrthoMatrix<T> {
    type Error = Error;
    fn try_from(m: Matrix<T>) -> Result<Self> {
        OrthoMatrix::new(m)
    }
}

impl<T: Real> From<OrthoMatrix<T>> for Matrix<T> {
    fn from(q: OrthoMatrix<T>) -> Matrix<T> {
        q.0
    }
}

impl<T: Real> fmt::Debug for OrthoMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Euclidean helpers on plain slices.
pub mod vec {
    use crate::scalar::Real;

    pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
        a.iter().zip(b).map(|(&x, &y)| x * y).sum()
    }

    pub fn norm<T: Real>(a: &[T]) -> T {
        dot(a, a).sqrt()
    }

    pub fn sub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
        a.iter().zip(b).map(|(&x, &y)| x - y).collect()
    }

    pub fn add<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
        a.iter().zip(b).map(|(&x, &y)| x + y).collect()
    }

    pub fn scale<T: Real>(a: &[T], s: T) -> Vec<T> {
        a.iter().map(|&x| x * s).collect()
    }

    pub fn normalized<T: Real>(a: &[T]) -> Option<Vec<T>> {
        let n = norm(a);
        if n == T::zero() || !n.is_finite() {
            None
        } else {
            Some(scale(a, T::one() / n))
        }
    }

    pub fn unit<T: Real>(n: usize, i: usize) -> Vec<T> {
        (0..n).map(|k| if k == i { T::one() } else { T::zero() }).collect()
    }
}
