//! Monte Carlo ellipsoid walks, single and coupled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{mirror_coupling, optimal_coupling_from_roots, WeightMatrix};
use crate::dpp::Payoff;
use crate::ellipsoid::{sample_unit_ball_into, CoefficientField, Domain, Ellipsoid};
use crate::error::{Error, Result};
use crate::matcore::{vec, Matrix, SymMatrix};
use crate::scalar::Real;
use crate::stats::{Estimate, RunningStats};

pub const DEFAULT_STEP_CAP: u64 = 1_000_000;
/// Rejection attempts for the complement draw of an overlap move.
pub const REJECTION_CAP: usize = 10_000;

/// Deterministic per-task generator: stream `stream` of the ChaCha8 family
/// keyed by `seed`.
pub fn task_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct WalkState<T: Real> {
    pub position: Vec<T>,
    pub steps: u64,
    pub exited: bool,
}

fn check_start<T: Real>(field: &CoefficientField<T>, domain: &Domain<T>, x0: &[T], eps: T) -> Result<()> {
    let n = field.dim();
    for got in [domain.dim(), x0.len()] {
        if got != n {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
    }
    if !(eps > T::zero()) {
        return Err(Error::param("eps", "must be positive"));
    }
    if !domain.contains(x0) {
        return Err(Error::Precondition("starting point must lie in the domain".into()));
    }
    Ok(())
}

fn step<T: Real, R: Rng + ?Sized>(
    field: &CoefficientField<T>,
    x: &mut [T],
    eps: T,
    y: &mut [T],
    dx: &mut [T],
    rng: &mut R,
) -> Result<()> {
    let s = field.sqrt_at(x)?;
    sample_unit_ball_into(rng, y);
    s.mul_vec_into(y, dx);
    for (xi, &d) in x.iter_mut().zip(dx.iter()) {
        *xi += eps * d;
    }
    Ok(())
}

fn run<T: Real, R: Rng + ?Sized>(
    field: &CoefficientField<T>,
    domain: &Domain<T>,
    x0: &[T],
    eps: T,
    rng: &mut R,
    step_cap: u64,
    mut visit: impl FnMut(&[T]),
) -> Result<WalkState<T>> {
    check_start(field, domain, x0, eps)?;
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut y, mut dx) = (vec![T::zero(); n], vec![T::zero(); n]);
    let mut steps = 0;
    while steps < step_cap {
        step(field, &mut x, eps, &mut y, &mut dx, rng)?;
        steps += 1;
        visit(&x);
        if !domain.contains(&x) {
            return Ok(WalkState {
                position: x,
                steps,
                exited: true,
            });
        }
    }
    Ok(WalkState {
        position: x,
        steps,
        exited: false,
    })
}

/// Runs one walk until it leaves `Ω` or `step_cap` steps have been taken;
/// `exited == false` marks a truncated walk.
pub fn walk<T: Real, R: Rng + ?Sized>(
    field: &CoefficientField<T>,
    domain: &Domain<T>,
    x0: &[T],
    eps: T,
    rng: &mut R,
    step_cap: u64,
) -> Result<WalkState<T>> {
    run(field, domain, x0, eps, rng, step_cap, |_| {})
}

/// [`walk`] that also returns every visited position after the start.
pub fn walk_path<T: Real, R: Rng + ?Sized>(
    field: &CoefficientField<T>,
    domain: &Domain<T>,
    x0: &[T],
    eps: T,
    rng: &mut R,
    step_cap: u64,
) -> Result<(WalkState<T>, Vec<Vec<T>>)> {
    let mut path = Vec::new();
    let state = run(field, domain, x0, eps, rng, step_cap, |x| path.push(x.to_vec()))?;
    Ok((state, path))
}

/// Sufficient statistics of a batch of walks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkSummary {
    /// Mean of `F(x_τ)` over completed walks.
    pub value: Estimate,
    pub exit_position: Vec<Estimate>,
    pub steps: Estimate,
    pub walks: u64,
    pub truncated: u64,
}

#[derive(Debug, Clone, Default)]
struct Accumulator {
    value: RunningStats,
    position: Vec<RunningStats>,
    steps: RunningStats,
    truncated: u64,
}

impl Accumulator {
    fn merge(self, other: Accumulator) -> Accumulator {
        let n = self.position.len().max(other.position.len());
        let mut a = self.position;
        let mut b = other.position;
        a.resize(n, RunningStats::new());
        b.resize(n, RunningStats::new());
        Accumulator {
            value: self.value.merge(other.value),
            position: a.into_iter().zip(b).map(|(p, q)| p.merge(q)).collect(),
            steps: self.steps.merge(other.steps),
            truncated: self.truncated + other.truncated,
        }
    }
}

/// Estimates `u_ε(x₀) = E[F(x_τ)]` from `walks` independent walks. Walk `i`
/// uses stream `i` of `seed`, so results do not depend on thread count.
#[allow(clippy::too_many_arguments)]
pub fn walk_estimate<T: Real>(
    field: &CoefficientField<T>,
    domain: &Domain<T>,
    payoff: &Payoff<T>,
    x0: &[T],
    eps: T,
    walks: u64,
    seed: u64,
    step_cap: u64,
) -> Result<WalkSummary> {
    check_start(field, domain, x0, eps)?;
    payoff.check_dim(x0.len())?;
    let acc = (0..walks)
        .into_par_iter()
        .map(|i| -> Result<Accumulator> {
            let mut rng = task_rng(seed, i);
            let st = walk(field, domain, x0, eps, &mut rng, step_cap)?;
            let mut a = Accumulator {
                position: vec![RunningStats::new(); x0.len()],
                ..Accumulator::default()
            };
            if st.exited {
                a.value.push(payoff.eval(&st.position).as_f64());
                for (s, p) in a.position.iter_mut().zip(&st.position) {
                    s.push(p.as_f64());
                }
                a.steps.push(st.steps as f64);
            } else {
                a.truncated = 1;
            }
            Ok(a)
        })
        .try_reduce(Accumulator::default, |a, b| Ok(a.merge(b)))?;
    Ok(WalkSummary {
        value: acc.value.estimate(),
        exit_position: acc.position.iter().map(|s| s.estimate()).collect(),
        steps: acc.steps.estimate(),
        walks,
        truncated: acc.truncated,
    })
}

/// How the second walk's step is tied to the first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum CouplingStrategy {
    /// Minimizer of the trace objective for the weight aligned with `X − Z`.
    Optimal { alpha: f64 },
    /// Reflection across the hyperplane orthogonal to `X − Z`.
    Mirror,
    /// Same sample for both walks.
    Identity,
}

impl CouplingStrategy {
    fn uses_overlap(&self) -> bool {
        !matches!(self, CouplingStrategy::Identity)
    }
}

/// Result of one coupled step.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledStep<T> {
    pub x: Vec<T>,
    pub z: Vec<T>,
    /// The step was an overlap move (`|X − Z| ≤ ½√λ ε`).
    pub overlap: bool,
    /// The complement draw hit [`REJECTION_CAP`] and fell back to an
    /// independent draw.
    pub fallback: bool,
}

fn coupling_matrix<T: Real>(
    strategy: CouplingStrategy,
    s1: &SymMatrix<T>,
    s2: &SymMatrix<T>,
    d: &[T],
) -> Result<Matrix<T>> {
    let n = d.len();
    let dir = match vec::normalized(d) {
        Some(u) => u,
        None => return Ok(Matrix::identity(n)),
    };
    Ok(match strategy {
        CouplingStrategy::Identity => Matrix::identity(n),
        CouplingStrategy::Mirror => mirror_coupling(&WeightMatrix::along(&dir, T::lit(0.5))?).into_matrix(),
        CouplingStrategy::Optimal { alpha } => {
            let w = WeightMatrix::along(&dir, T::lit(alpha))?;
            optimal_coupling_from_roots(s1, s2, &w)?.q.into_matrix()
        }
    })
}

/// Advances the pair `(X, Z)` by one coupled step.
///
/// Away from the diagonal both walks use one uniform `y ∈ 𝔹`:
/// `X⁺ = X + εA(X)^{1/2}y`, `Z⁺ = Z + εA(Z)^{1/2}Qy`. When
/// `|X − Z| ≤ ½√λ ε` and the strategy is not `Identity`, a maximal coupling
/// of the two uniform laws is used instead: `Y ~ U(E_X)`; if `Y ∈ E_Z` both
/// move to `Y`, otherwise `Z⁺ ~ U(E_Z ∖ E_X)`. Equal determinants make each
/// marginal exactly uniform.
pub fn coupled_step<T: Real, R: Rng + ?Sized>(
    field: &CoefficientField<T>,
    x: &[T],
    z: &[T],
    eps: T,
    strategy: CouplingStrategy,
    rng: &mut R,
) -> Result<CoupledStep<T>> {
    let n = x.len();
    let s1 = field.sqrt_at(x)?;
    let s2 = field.sqrt_at(z)?;
    let d = vec::sub(x, z);
    let dist = vec::norm(&d);
    let near = T::lit(0.5) * field.class().lambda.sqrt() * eps;
    if strategy.uses_overlap() && dist <= near {
        let ex = Ellipsoid::new(x.to_vec(), s1.scale(eps))?;
        let ez = Ellipsoid::new(z.to_vec(), s2.scale(eps))?;
        let y = ex.sample(rng);
        if ez.contains(&y) {
            return Ok(CoupledStep {
                x: y.clone(),
                z: y,
                overlap: true,
                fallback: false,
            });
        }
        for _ in 0..REJECTION_CAP {
            let w = ez.sample(rng);
            if !ex.contains(&w) {
                return Ok(CoupledStep {
                    x: y,
                    z: w,
                    overlap: true,
                    fallback: false,
                });
            }
        }
        let w = ez.sample(rng);
        return Ok(CoupledStep {
            x: y,
            z: w,
            overlap: true,
            fallback: true,
        });
    }
    let q = coupling_matrix(strategy, &s1, &s2, &d)?;
    let mut y = vec![T::zero(); n];
    sample_unit_ball_into(rng, &mut y);
    let qy = q.mul_vec(&y);
    let hx = s1.mul_vec(&y);
    let hz = s2.mul_vec(&qy);
    Ok(CoupledStep {
        x: x.iter().zip(&hx).map(|(&a, &b)| a + eps * b).collect(),
        z: z.iter().zip(&hz).map(|(&a, &b)| a + eps * b).collect(),
        overlap: false,
        fallback: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledWalkStats {
    pub met: bool,
    pub meet_step: Option<u64>,
    pub exit_step: Option<u64>,
    pub final_separation: f64,
    pub steps: u64,
    pub overlap_moves: u64,
    pub fallbacks: u64,
    /// Neither met nor exited within the step cap.
    pub truncated: bool,
}

/// Runs two coupled walks until they occupy the same point, either leaves
/// `Ω`, or `step_cap` steps have been taken.
#[allow(clippy::too_many_arguments)]
pub fn coupled_walk<T: Real, R: Rng + ?Sized>(
    field: &CoefficientField<T>,
    domain: &Domain<T>,
    x0: &[T],
    z0: &[T],
    eps: T,
    strategy: CouplingStrategy,
    rng: &mut R,
    step_cap: u64,
) -> Result<CoupledWalkStats> {
    coupled_walk_observed(field, domain, x0, z0, eps, strategy, rng, step_cap, |_, _| {})
}

/// [`coupled_walk`] calling `visit(X, Z)` after every step.
#[allow(clippy::too_many_arguments)]
pub fn coupled_walk_observed<T: Real, R: Rng + ?Sized>(
    field: &CoefficientField<T>,
    domain: &Domain<T>,
    x0: &[T],
    z0: &[T],
    eps: T,
    strategy: CouplingStrategy,
    rng: &mut R,
    step_cap: u64,
    mut visit: impl FnMut(&[T], &[T]),
) -> Result<CoupledWalkStats> {
    check_start(field, domain, x0, eps)?;
    check_start(field, domain, z0, eps)?;
    let mut x = x0.to_vec();
    let mut z = z0.to_vec();
    let mut stats = CoupledWalkStats {
        met: false,
        meet_step: None,
        exit_step: None,
        final_separation: 0.0,
        steps: 0,
        overlap_moves: 0,
        fallbacks: 0,
        truncated: false,
    };
    loop {
        if x == z {
            stats.met = true;
            stats.meet_step = Some(stats.steps);
            break;
        }
        if stats.steps >= step_cap {
            stats.truncated = true;
            break;
        }
        let st = coupled_step(field, &x, &z, eps, strategy, rng)?;
        stats.steps += 1;
        stats.overlap_moves += st.overlap as u64;
        stats.fallbacks += st.fallback as u64;
        x = st.x;
        z = st.z;
        visit(&x, &z);
        if x != z && (!domain.contains(&x) || !domain.contains(&z)) {
            stats.exit_step = Some(stats.steps);
            break;
        }
    }
    stats.final_separation = vec::norm(&vec::sub(&x, &z)).as_f64();
    Ok(stats)
}

/// Fraction of coupled walks from `(x0, z0)` that meet before exiting.
#[allow(clippy::too_many_arguments)]
pub fn meeting_frequency<T: Real>(
    field: &CoefficientField<T>,
    domain: &Domain<T>,
    x0: &[T],
    z0: &[T],
    eps: T,
    strategy: CouplingStrategy,
    runs: u64,
    seed: u64,
    step_cap: u64,
) -> Result<Estimate> {
    let stats = (0..runs)
        .into_par_iter()
        .map(|i| -> Result<RunningStats> {
            let mut rng = task_rng(seed, i);
            let s = coupled_walk(field, domain, x0, z0, eps, strategy, &mut rng, step_cap)?;
            let mut r = RunningStats::new();
            r.push(if s.met { 1.0 } else { 0.0 });
            Ok(r)
        })
        .try_reduce(RunningStats::new, |a, b| Ok(a.merge(b)))?;
    Ok(stats.estimate())
}
