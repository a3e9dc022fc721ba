//! Projection split of a coupled step, and the large-distortion ellipsoid
//! pairs for which no measure-preserving coupling shrinks the separation
//! direction more than it stirs the others.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::beta::beta_reg;

use crate::ellipsoid::{unit_ball_volume, Ellipsoid};
use crate::error::{Error, Result};
use crate::matcore::{haar_orthogonal, vec, Matrix, OrthoMatrix, SymMatrix};
use crate::scalar::Real;
use crate::stats::{Estimate, RunningStats};

/// Samples drawn by the measure-preservation audit.
pub const AUDIT_SAMPLES: usize = 100_000;
/// Significance level of the audit's chi-square test.
pub const AUDIT_LEVEL: f64 = 0.01;
/// Bins per coordinate of the audit partition (`8ⁿ` cells).
pub const AUDIT_BINS: usize = 8;

pub type MapFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;

/// A map `φ` with `φ(E₁) = E₂`.
#[derive(Clone)]
pub enum CouplingMap<T: Real> {
    /// `φ(y) = c₂ + S₂ Q S₁^{-1} (y − c₁)`.
    Linear { matrix: Matrix<T>, shift: Vec<T>, center: Vec<T> },
    /// Declared measure preserving; checked by [`audit_measure_preserving`]
    /// before use.
    Custom(MapFn<T>),
}

impl<T: Real> fmt::Debug for CouplingMap<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CouplingMap::Linear { matrix, .. } => f.debug_struct("Linear").field("matrix", matrix).finish(),
            CouplingMap::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl<T: Real> CouplingMap<T> {
    /// The linear coupling through `Q`; requires `|E₁| = |E₂|`.
    pub fn linear(e1: &Ellipsoid<T>, e2: &Ellipsoid<T>, q: &OrthoMatrix<T>) -> Result<Self> {
        let n = e1.dim();
        for got in [e2.dim(), q.n()] {
            if got != n {
                return Err(Error::DimensionMismatch { expected: n, got });
            }
        }
        let (d1, d2) = (e1.shape_det().as_f64().abs(), e2.shape_det().as_f64().abs());
        if (d1 - d2).abs() > 1e-9 * d1.max(d2) {
            return Err(Error::Precondition(format!(
                "ellipsoid volumes differ (shape determinants {d1} and {d2})"
            )));
        }
        let s1_inv = e1.shape().inverse()?;
        let matrix = e2.shape().matmul(q).matmul(&s1_inv);
        Ok(CouplingMap::Linear {
            matrix,
            shift: e2.center().to_vec(),
            center: e1.center().to_vec(),
        })
    }

    pub fn custom(f: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static) -> Self {
        CouplingMap::Custom(Arc::new(f))
    }

    pub fn apply(&self, y: &[T]) -> Vec<T> {
        match self {
            CouplingMap::Linear { matrix, shift, center } => vec::add(shift, &matrix.mul_vec(&vec::sub(y, center))),
            CouplingMap::Custom(f) => f(y),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub statistic: f64,
    pub critical: f64,
    pub cells: usize,
    /// Pushed-forward samples that landed outside `E₂`.
    pub escaped: usize,
    pub passes: bool,
}

/// Cell of a point `u ∈ 𝔹` in an equal-volume partition: radial bins in
/// `|u|ⁿ`, angular bins in `θ` (`n = 2`) or in `(cos θ, φ)` (`n = 3`).
fn ball_cell(u: &[f64], bins: usize) -> Result<usize> {
    let b = bins as f64;
    let bin = |t: f64| ((t * b) as usize).min(bins - 1);
    let r2: f64 = u.iter().map(|v| v * v).sum();
    match u.len() {
        2 => {
            let theta = (u[1].atan2(u[0]) + std::f64::consts::PI) / (2.0 * std::f64::consts::PI);
            Ok(bin(r2) * bins + bin(theta))
        }
        3 => {
            let r = r2.sqrt();
            let cos = if r > 0.0 { u[2] / r } else { 0.0 };
            let phi = (u[1].atan2(u[0]) + std::f64::consts::PI) / (2.0 * std::f64::consts::PI);
            Ok((bin(r * r2) * bins + bin((cos + 1.0) / 2.0)) * bins + bin(phi))
        }
        n => Err(Error::UnsupportedDimension(n)),
    }
}

/// Chi-square test that `φ` pushes the uniform law on `E₁` to the uniform
/// law on `E₂`, over an `8ⁿ`-cell equal-volume partition of `E₂`.
pub fn audit_measure_preserving<T: Real, R: Rng + ?Sized>(
    e1: &Ellipsoid<T>,
    e2: &Ellipsoid<T>,
    phi: &CouplingMap<T>,
    samples: usize,
    rng: &mut R,
) -> Result<AuditReport> {
    let n = e1.dim();
    let cells = AUDIT_BINS.pow(n as u32);
    let mut counts = vec![0u64; cells];
    let mut escaped = 0;
    for _ in 0..samples {
        let y = e1.sample(rng);
        let u: Vec<f64> = e2.to_ball(&phi.apply(&y)).iter().map(|v| v.as_f64()).collect();
        if u.iter().map(|v| v * v).sum::<f64>() > 1.0 + 1e-9 {
            escaped += 1;
            continue;
        }
        counts[ball_cell(&u, AUDIT_BINS)?] += 1;
    }
    let expected = samples as f64 / cells as f64;
    let statistic: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let chi = ChiSquared::new((cells - 1) as f64).map_err(|e| Error::param("cells", e.to_string()))?;
    let critical = chi.inverse_cdf(1.0 - AUDIT_LEVEL);
    Ok(AuditReport {
        statistic,
        critical,
        cells,
        escaped,
        passes: escaped == 0 && statistic <= critical,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSplit {
    /// `⨍_{E₁} |P(y − φ(y))|²`, `P` the projection onto the direction.
    pub parallel: Estimate,
    /// `⨍_{E₁} |(I − P)(y − φ(y))|²`.
    pub orthogonal: Estimate,
}

impl ProjectionSplit {
    /// The projection inequality `parallel > orthogonal` fails.
    pub fn violated(&self) -> bool {
        self.parallel.mean <= self.orthogonal.mean
    }
}

fn split_of(v: &[f64], e: &[f64]) -> (f64, f64) {
    let p: f64 = v.iter().zip(e).map(|(a, b)| a * b).sum();
    let total: f64 = v.iter().map(|a| a * a).sum();
    (p * p, (total - p * p).max(0.0))
}

/// Monte Carlo estimate of the parallel/orthogonal split of `y − φ(y)`.
/// Custom maps must pass the measure-preservation audit first.
pub fn projection_split<T: Real, R: Rng + ?Sized>(
    e1: &Ellipsoid<T>,
    e2: &Ellipsoid<T>,
    phi: &CouplingMap<T>,
    direction: &[T],
    samples: usize,
    rng: &mut R,
) -> Result<ProjectionSplit> {
    if samples < 100_000 {
        return Err(Error::param("samples", "at least 10^5 samples are required"));
    }
    if direction.len() != e1.dim() {
        return Err(Error::DimensionMismatch {
            expected: e1.dim(),
            got: direction.len(),
        });
    }
    let e: Vec<f64> = vec::normalized(direction)
        .ok_or_else(|| Error::param("direction", "must be non-zero"))?
        .iter()
        .map(|v| v.as_f64())
        .collect();
    if let CouplingMap::Custom(_) = phi {
        let audit = audit_measure_preserving(e1, e2, phi, AUDIT_SAMPLES, rng)?;
        if !audit.passes {
            return Err(Error::NotMeasurePreserving {
                statistic: audit.statistic,
                critical: audit.critical,
            });
        }
    }
    let mut par = RunningStats::new();
    let mut orth = RunningStats::new();
    for _ in 0..samples {
        let y = e1.sample(rng);
        let v: Vec<f64> = vec::sub(&y, &phi.apply(&y)).iter().map(|x| x.as_f64()).collect();
        let (p, o) = split_of(&v, &e);
        par.push(p);
        orth.push(o);
    }
    Ok(ProjectionSplit {
        parallel: par.estimate(),
        orthogonal: orth.estimate(),
    })
}

/// `|E ∩ {|y_axis − c_axis| ≥ t}| / |E|` in closed form.
///
/// With `L` the Euclidean norm of row `axis` of the shape, `y_axis − c_axis`
/// is distributed as `L u₁` for `u` uniform in `𝔹`, and `u₁² ~ Beta(½, (n+1)/2)`.
pub fn halfslab_volume_fraction<T: Real>(e: &Ellipsoid<T>, axis: usize, threshold: f64) -> Result<f64> {
    let n = e.dim();
    if axis >= n {
        return Err(Error::param("axis", format!("must be below the dimension {n}")));
    }
    let l = vec::norm(e.shape().row(axis)).as_f64();
    let s = threshold.abs() / l;
    if s >= 1.0 {
        return Ok(0.0);
    }
    if s == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - beta_reg(0.5, (n as f64 + 1.0) / 2.0, s * s))
}

/// One coupling of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingRecord {
    pub coupling_id: String,
    pub parallel: f64,
    pub orthogonal: f64,
    pub parallel_stderr: f64,
    pub orthogonal_stderr: f64,
    pub violated: bool,
}

/// Map-independent bounds and the sweep that tests them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub case: String,
    pub dimension: usize,
    pub samples: usize,
    pub volume_e1: f64,
    pub volume_e2: f64,
    /// Pointwise bound on `|P(y − φ(y))|²`.
    pub parallel_bound: f64,
    /// `16 · |E₁ ∩ {|y₂| ≥ 5}| / |E₁|`.
    pub orthogonal_floor: f64,
    pub slab_fraction: f64,
    pub max_parallel: f64,
    pub min_orthogonal: f64,
    pub all_violated: bool,
    pub records: Vec<CouplingRecord>,
}

/// Runs every coupling over one shared sample of `E₁`, stored flat.
fn sweep(
    e1: &Ellipsoid<f64>,
    e2: &Ellipsoid<f64>,
    couplings: Vec<(String, OrthoMatrix<f64>)>,
    points: &[f64],
    direction: &[f64],
) -> Result<Vec<CouplingRecord>> {
    let n = e1.dim();
    couplings
        .into_par_iter()
        .map(|(id, q)| {
            let CouplingMap::Linear { matrix, shift, center } = CouplingMap::linear(e1, e2, &q)? else {
                unreachable!("linear constructor")
            };
            let m = matrix.to_rows();
            let mut par = RunningStats::new();
            let mut orth = RunningStats::new();
            let mut v = vec![0.0; n];
            for y in points.chunks_exact(n) {
                for i in 0..n {
                    let mut img = shift[i];
                    for j in 0..n {
                        img += m[i][j] * (y[j] - center[j]);
                    }
                    v[i] = y[i] - img;
                }
                let (p, o) = split_of(&v, direction);
                par.push(p);
                orth.push(o);
            }
            let (p, o) = (par.estimate(), orth.estimate());
            Ok(CouplingRecord {
                coupling_id: id,
                parallel: p.mean,
                orthogonal: o.mean,
                parallel_stderr: p.stderr,
                orthogonal_stderr: o.stderr,
                violated: p.mean <= o.mean,
            })
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn report(
    case: &str,
    e1: &Ellipsoid<f64>,
    e2: &Ellipsoid<f64>,
    couplings: Vec<(String, OrthoMatrix<f64>)>,
    samples: usize,
    parallel_bound: f64,
    rng: &mut (impl Rng + ?Sized),
) -> Result<CounterexampleReport> {
    if samples < 1_000_000 {
        return Err(Error::param("samples", "at least 10^6 samples are required"));
    }
    let n = e1.dim();
    // every coupling sees the same sample of E₁
    let points: Vec<f64> = (0..samples).flat_map(|_| e1.sample(rng)).collect();
    let direction = vec::unit(n, 0);
    let records = sweep(e1, e2, couplings, &points, &direction)?;
    let slab_fraction = halfslab_volume_fraction(e1, 1, 5.0)?;
    Ok(CounterexampleReport {
        case: case.to_string(),
        dimension: n,
        samples,
        volume_e1: e1.volume(),
        volume_e2: e2.volume(),
        parallel_bound,
        orthogonal_floor: 16.0 * slab_fraction,
        slab_fraction,
        max_parallel: records.iter().map(|r| r.parallel).fold(f64::NEG_INFINITY, f64::max),
        min_orthogonal: records.iter().map(|r| r.orthogonal).fold(f64::INFINITY, f64::min),
        all_violated: records.iter().all(|r| r.violated),
        records,
    })
}

/// `E₁ = diag(1/10, 10)𝔹`, `E₂ = 𝔹` in the plane.
pub fn planar_pair() -> (Ellipsoid<f64>, Ellipsoid<f64>) {
    (
        Ellipsoid::new(vec![0.0; 2], SymMatrix::diag(&[0.1, 10.0])).expect("positive shape"),
        Ellipsoid::unit_ball(2),
    )
}

/// `E₁ = diag(1, 100, 1)𝔹`, `E₂ = diag(1, 1, 100)𝔹`.
pub fn spatial_pair() -> (Ellipsoid<f64>, Ellipsoid<f64>) {
    (
        Ellipsoid::new(vec![0.0; 3], SymMatrix::diag(&[1.0, 100.0, 1.0])).expect("positive shape"),
        Ellipsoid::new(vec![0.0; 3], SymMatrix::diag(&[1.0, 1.0, 100.0])).expect("positive shape"),
    )
}

/// Rotations by `2πk/angles` and the reflections obtained by composing each
/// with `diag(1, −1)`.
pub fn planar_couplings(angles: usize) -> Vec<(String, OrthoMatrix<f64>)> {
    let mut out = Vec::with_capacity(2 * angles);
    for k in 0..angles {
        let t = 2.0 * std::f64::consts::PI * k as f64 / angles as f64;
        let (s, c) = t.sin_cos();
        let rot = Matrix::from_rows(&[vec![c, -s], vec![s, c]]).expect("square");
        let refl = Matrix::from_rows(&[vec![c, s], vec![s, -c]]).expect("square");
        out.push((format!("rotation-{k}"), OrthoMatrix::new(rot).expect("rotation")));
        out.push((format!("reflection-{k}"), OrthoMatrix::new(refl).expect("reflection")));
    }
    out
}

/// The 24 signed permutation matrices with determinant `+1` in three
/// dimensions.
pub fn proper_signed_permutations() -> Vec<OrthoMatrix<f64>> {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::new();
    for p in perms {
        for signs in 0..8u32 {
            let m = Matrix::from_fn(3, |i, j| {
                if p[i] == j {
                    if signs >> i & 1 == 1 {
                        -1.0
                    } else {
                        1.0
                    }
                } else {
                    0.0
                }
            });
            if m.determinant() > 0.0 {
                out.push(OrthoMatrix::new(m).expect("signed permutation"));
            }
        }
    }
    out
}

/// The planar counterexample over `2·angles` linear couplings.
pub fn counterexample_2d<R: Rng + ?Sized>(samples: usize, angles: usize, rng: &mut R) -> Result<CounterexampleReport> {
    if angles == 0 {
        return Err(Error::param("coupling_grid", "must be positive"));
    }
    let (e1, e2) = planar_pair();
    // |y₁| ≤ 1/10 on E₁ and |φ(y)₁| ≤ 1 on E₂
    report("2d", &e1, &e2, planar_couplings(angles), samples, 1.21, rng)
}

/// The spatial counterexample over the proper signed permutations and
/// `haar` random rotations.
pub fn counterexample_3d<R: Rng + ?Sized>(samples: usize, haar: usize, rng: &mut R) -> Result<CounterexampleReport> {
    let (e1, e2) = spatial_pair();
    let mut couplings: Vec<(String, OrthoMatrix<f64>)> = proper_signed_permutations()
        .into_iter()
        .enumerate()
        .map(|(i, q)| (format!("permutation-{i}"), q))
        .collect();
    for i in 0..haar {
        couplings.push((format!("haar-{i}"), haar_orthogonal(3, rng)));
    }
    // |y₁| ≤ 1 on E₁ and |φ(y)₁| ≤ 1 on E₂
    report("3d", &e1, &e2, couplings, samples, 4.0, rng)
}

/// `|𝔹| · |det S|` for a shape matrix; the volumes of both pairs agree.
pub fn shape_volume(shape: &SymMatrix<f64>) -> f64 {
    unit_ball_volume(shape.n()) * shape.determinant().abs()
}
