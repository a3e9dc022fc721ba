use ellipsoid_lab::dpp::task_rng;
use ellipsoid_lab::matcore::{eig_sym, haar_orthogonal, polar_orthogonal, principal_sqrt, random_spd};
use ellipsoid_lab::{Matrix, Matrix64, OrthoMatrix, SymMatrix, SymMatrix32, SymMatrix64};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn gaussian(n: usize, rng: &mut impl Rng) -> Matrix64 {
    Matrix::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// `BᵀB + shift·I` from raw entries.
fn spd_from(entries: &[f64], n: usize, shift: f64) -> SymMatrix64 {
    let b = Matrix::from_fn(n, |i, j| entries[i * n + j]);
    let mut m = b.transpose().matmul(&b);
    for i in 0..n {
        m[(i, i)] += shift;
    }
    SymMatrix::symmetrize(&m)
}

fn spd_strategy() -> impl Strategy<Value = SymMatrix64> {
    (2usize..=4).prop_flat_map(|n| {
        (prop::collection::vec(-2.0f64..2.0, n * n), 0.05f64..2.0).prop_map(move |(e, s)| spd_from(&e, n, s))
    })
}

proptest! {
    #[test]
    fn sqrt_squares_back(a in spd_strategy()) {
        let s = principal_sqrt(&a).unwrap();
        let err = s.matmul(&s).sub(&a).frobenius_norm();
        prop_assert!(err <= 1e-9 * a.frobenius_norm().max(1.0), "{err}");
        prop_assert!(s.is_symmetric());
        prop_assert!(eig_sym(&s).unwrap().values.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn eigen_reconstruction(a in spd_strategy()) {
        let e = eig_sym(&a).unwrap();
        let v = e.vectors.as_matrix();
        let d = Matrix::diag(&e.values);
        let back = v.matmul(&d).matmul(&v.transpose());
        prop_assert!(back.sub(&a).max_abs() <= 1e-10 * a.max_abs().max(1.0));
        prop_assert!(e.vectors.orthogonality_defect() < 1e-12);
    }

    #[test]
    fn max_trace_lower_bound(entries in prop::collection::vec(-3.0f64..3.0, 9)) {
        let m = Matrix::from_fn(3, |i, j| entries[i * 3 + j]);
        let p = polar_orthogonal(&m).unwrap();
        let floor = 3.0 * m.determinant().abs().powf(1.0 / 3.0);
        prop_assert!(p.value >= floor - 1e-9, "{} < {}", p.value, floor);
    }
}

#[test]
fn sqrt_of_thousand_random_spd() {
    let mut rng = task_rng(100, 0);
    for i in 0..1000 {
        let n = 2 + i % 3;
        let a: SymMatrix64 = random_spd(n, 0.1, 10.0, &mut rng);
        let s = principal_sqrt(&a).unwrap();
        assert!(s.matmul(&s).sub(&a).frobenius_norm() <= 1e-9);
    }
}

#[test]
fn polar_value_dominates_haar_samples() {
    let mut rng = task_rng(101, 0);
    for n in 2..=4 {
        for _ in 0..100 {
            let m = gaussian(n, &mut rng);
            let p = polar_orthogonal(&m).unwrap();
            let attained = m.matmul(&p.q0).trace();
            assert!((attained - p.value).abs() <= 1e-9);
            for _ in 0..10_000 {
                let q: OrthoMatrix<f64> = haar_orthogonal(n, &mut rng);
                assert!(m.matmul(&q).trace() <= p.value + 1e-9);
            }
        }
    }
}

#[test]
fn single_precision_sqrt() {
    let a = SymMatrix32::from_rows(&[vec![5.0, -12.0], vec![-12.0, 29.0]]).unwrap();
    let s = principal_sqrt(&a).unwrap();
    let want = [[1.0f32, -2.0], [-2.0, 5.0]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((s[(i, j)] - want[i][j]).abs() < 1e-4);
        }
    }
}
