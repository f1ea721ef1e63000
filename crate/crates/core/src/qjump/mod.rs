//! Quantum-jump unraveling of the master equation and trajectory-resolved
//! observables.

mod density;
mod propagator;
mod rng;
pub mod storage;
mod trajectory;

pub use density::{
    population_marginal, stationary_density, BinSpec, Bimodality, Histogram1D, Histogram2D, Projection,
    MIN_PEAK_FRACTION,
};
pub use propagator::{
    collapse, jump_probabilities, propagate, step, Generator, JumpChannel, JumpEvent, Workspace, P_TOT_CAP,
};
pub use rng::{trajectory_rng, trajectory_seed};
pub use trajectory::{
    simulate_ensemble, simulate_trajectory, EnsembleSetup, EnsembleSpec, InitialStatePolicy, TrajectoryRecord,
    TruncationWarnings,
};
