//! Dwell times, survival curves, escape rates and their scaling with the
//! inverse noise strength.

mod dwell;
mod rate;
mod relaxation;
mod scaling;
mod survival;
mod threshold;

pub use dwell::{extract_dwells, incident, DwellRecord};
pub use rate::{fit_conditional_rate, RateControls, RateFit};
pub use relaxation::{effective_relaxation, rate_matrix, stationary_occupations};
pub use scaling::{effective_action, fit_scaling, Direction, ScalingFit, ScalingForm, ScalingParams, ScalingPoint};
pub use survival::{kaplan_meier, SurvivalCurve};
pub use threshold::{select_t0, ThresholdCandidate, ThresholdControls, ThresholdSelection};
