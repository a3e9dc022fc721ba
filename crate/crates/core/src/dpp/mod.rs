//! The dynamic programming principle: grid fixed point, Monte Carlo walks,
//! and Hölder quotients of the computed solutions.

pub mod grid;
pub mod holder;
pub mod payoff;
pub mod walk;

pub use grid::{solve_dpp, GridSidecar, GridSolution, Lattice, SolveOptions};
pub use holder::{holder_estimate, mean_value_residual, HolderEstimate};
pub use payoff::Payoff;
pub use walk::{
    coupled_step, coupled_walk, coupled_walk_observed, meeting_frequency, task_rng, walk, walk_estimate, walk_path,
    CoupledStep, CoupledWalkStats, CouplingStrategy, WalkState, WalkSummary, DEFAULT_STEP_CAP,
};
