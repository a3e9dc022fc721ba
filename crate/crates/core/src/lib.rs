//! Numerics for ellipsoid processes: optimal orthogonal couplings between
//! ellipsoids, a solver for the mean value dynamic programming principle,
//! Monte Carlo checks of the comparison-function argument behind the
//! asymptotic Hölder estimate, and the large-distortion counterexamples.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the common `f64` instantiation.

pub mod comparison;
pub mod counterexamples;
pub mod coupling;
pub mod dpp;
pub mod ellipsoid;
pub mod error;
pub mod matcore;
pub mod scalar;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Real;
pub use stats::{Estimate, RunningStats};

pub use comparison::{build_constants, verify_key_inequality, ComparisonConstants, Verdict};
pub use coupling::{optimal_coupling, thresholds, trace_objective, CouplingResult, WeightMatrix};
pub use dpp::{solve_dpp, walk_estimate, GridSolution, Payoff, SolveOptions};
pub use ellipsoid::{CoefficientField, Domain, Ellipsoid, Integrator};
pub use matcore::{EllipticityClass, Matrix, OrthoMatrix, SymMatrix};

pub type Matrix64 = Matrix<f64>;
pub type SymMatrix64 = SymMatrix<f64>;
pub type OrthoMatrix64 = OrthoMatrix<f64>;
pub type Ellipsoid64 = Ellipsoid<f64>;
pub type Field64 = CoefficientField<f64>;
pub type Domain64 = Domain<f64>;
pub type Class64 = EllipticityClass<f64>;

pub type Matrix32 = Matrix<f32>;
pub type SymMatrix32 = SymMatrix<f32>;
pub type OrthoMatrix32 = OrthoMatrix<f32>;
pub type Ellipsoid32 = Ellipsoid<f32>;
pub type Field32 = CoefficientField<f32>;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
