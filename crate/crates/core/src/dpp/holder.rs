use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dpp::GridSolution;
use crate::ellipsoid::{CoefficientField, Integrator};
use crate::error::{Error, Result};
use crate::matcore::Matrix;
use crate::scalar::Real;
use crate::stats::Estimate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    /// `max |u(x) − u(z)| / (|x − z|^α + ε^α)` over node pairs.
    pub quotient: f64,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub nodes: usize,
}

/// Empirical Hölder quotient over interior nodes within `r_inner` of the
/// domain centre.
pub fn holder_estimate<T: Real>(sol: &GridSolution<T>, alpha: f64, r_inner: f64) -> Result<HolderEstimate> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::param("alpha", "must lie in (0, 1]"));
    }
    let center: Vec<f64> = sol.domain.center().iter().map(|v| v.as_f64()).collect();
    let n = center.len();
    let probe: Vec<T> = center
        .iter()
        .enumerate()
        .map(|(i, &c)| T::lit(if i == 0 { c + r_inner } else { c }))
        .collect();
    if !(r_inner > 0.0) || !sol.domain.contains(&probe) {
        return Err(Error::Precondition("r_inner must be positive and inside the domain".into()));
    }
    let pts: Vec<(Vec<f64>, f64)> = sol
        .interior()
        .filter(|(x, _)| x.iter().zip(&center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>() < r_inner * r_inner)
        .map(|(x, v)| (x, v.as_f64()))
        .collect();
    let floor = sol.eps.powf(alpha);
    let best = (0..pts.len())
        .into_par_iter()
        .map(|i| {
            let (xi, ui) = &pts[i];
            let mut best = (0.0, i, i);
            for (j, (xj, uj)) in pts.iter().enumerate().skip(i + 1) {
                let d: f64 = (0..n).map(|k| (xi[k] - xj[k]).powi(2)).sum::<f64>().sqrt();
                let q = (ui - uj).abs() / (d.powf(alpha) + floor);
                if q > best.0 {
                    best = (q, i, j);
                }
            }
            best
        })
        .reduce(|| (0.0, 0, 0), |a, b| if b.0 > a.0 { b } else { a });
    let (x, z) = if pts.is_empty() {
        (vec![], vec![])
    } else {
        (pts[best.1].0.clone(), pts[best.2].0.clone())
    };
    Ok(HolderEstimate {
        quotient: best.0,
        x,
        z,
        nodes: pts.len(),
    })
}

/// `⨍_{E_x} u − u(x) − ε²/(2(n+2)) · trace(A(x) D²u(x))`.
///
/// The average is taken of `u(x + εA^{1/2}y) − u(x)` so that small steps do
/// not cancel against `u(x)`.
pub fn mean_value_residual<T, R, U>(
    field: &CoefficientField<T>,
    x: &[T],
    eps: T,
    u: U,
    hessian: &Matrix<T>,
    integrator: &Integrator,
    rng: &mut R,
) -> Result<Estimate>
where
    T: Real,
    R: Rng + ?Sized,
    U: Fn(&[T]) -> T,
{
    let n = field.dim();
    if x.len() != n || hessian.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if x.len() != n { x.len() } else { hessian.n() },
        });
    }
    let a = field.evaluate(x)?;
    let s = field.sqrt_at(x)?;
    let ux = u(x);
    let mut p = vec![T::zero(); n];
    let avg = integrator.ball_average::<T, _, _>(n, rng, |y: &[T]| {
        s.mul_vec_into(y, &mut p);
        for i in 0..n {
            p[i] = x[i] + eps * p[i];
        }
        (u(&p) - ux).as_f64()
    })?;
    let correction = (eps * eps / T::lit(2.0 * (n as f64 + 2.0)) * a.trace_of_product(hessian)).as_f64();
    Ok(Estimate {
        mean: avg.mean - correction,
        ..avg
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dpp::{solve_dpp, Payoff, SolveOptions};
    use crate::ellipsoid::Domain;
    use crate::matcore::{EllipticityClass, SymMatrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadratic_mean_value_is_exact() {
        let cls = EllipticityClass::new(2, 1.0, 3.0).unwrap();
        let a = SymMatrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.5]]).unwrap();
        let field = CoefficientField::constant(cls, a).unwrap();
        let h = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, -4.0]]).unwrap();
        let hh = h.clone();
        let u = move |y: &[f64]| 0.5 * (hh[(0, 0)] * y[0] * y[0] + 2.0 * hh[(0, 1)] * y[0] * y[1] + hh[(1, 1)] * y[1] * y[1]) + y[0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = mean_value_residual(&field, &[0.3, -0.2], 0.1, u, &h, &Integrator::default(), &mut rng).unwrap();
        assert!(r.mean.abs() < 1e-14, "{r:?}");
    }

    #[test]
    fn second_moment_gap() {
        let field = CoefficientField::identity(3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let eps = 0.2;
        let u = |y: &[f64]| y.iter().map(|v| v * v).sum::<f64>();
        let r = mean_value_residual(&field, &[0.0; 3], eps, u, &Matrix::zeros(3), &Integrator::default(), &mut rng).unwrap();
        assert!((r.mean - eps * eps * 3.0 / 5.0).abs() < 1e-14);
    }

    #[test]
    fn constant_solution_has_zero_quotient() {
        let field = CoefficientField::identity(2);
        let dom = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let sol = solve_dpp(&field, &dom, &Payoff::Constant { value: 1.0 }, &SolveOptions::new(0.25, 1.0 / 16.0)).unwrap();
        let q = holder_estimate(&sol, 0.5, 0.5).unwrap();
        assert!(q.quotient < 1e-12);
        assert!(q.nodes > 100);
    }
}
