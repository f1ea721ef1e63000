//! Physical parameters, the truncated Fock space, and the operators of the
//! driven optomechanical resonator.

mod fock;
mod hamiltonian;
mod operator;
mod params;
mod state;

pub use fock::{FockCutoffs, DEFAULT_DIM_LIMIT};
pub use hamiltonian::{
    build_effective_hamiltonian, build_hamiltonian, build_position_damping, ModelOperators,
};
pub use operator::{OperatorBuilder, OperatorMatrix};
pub use params::{resolve_params, ResolvedParams, ScalingPlan, Scheme, SystemParams};
pub use state::{expectation, QuantumState};
