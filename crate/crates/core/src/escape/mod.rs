//! Switching events and the geometry of escape: event-aligned densities,
//! exit-phase histograms and the phase-resolved hazard.

mod circular;
mod events;
mod phase;

pub use circular::{bin_center, phase_bin, uniform_reference_std, wrap_phase, CircularStats};
pub use events::{find_events, EventFilters, SwitchEvent};
pub use phase::{
    conditioned_density, exit_phases, hazard, phase_histogram, stationary_phase_distribution, HazardProfile,
    PhaseDensity, PhaseGrid, PhaseHistogram, SnapshotHistogram, DEFAULT_PHASE_BINS, HAZARD_FLOOR,
};
