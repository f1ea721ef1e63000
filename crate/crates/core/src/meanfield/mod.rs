//! Deterministic mean-field dynamics of the coherent amplitudes, limit-cycle
//! extraction and the attractor classification scan.

mod classify;
mod cycles;
pub mod rk45;
pub mod spectral;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemParams;

pub use classify::{
    classify_point, classify_point_detailed, cluster_diagnostics, default_initial_grid,
    initial_grid, refined_grid, AttractorDiagnostics, CellLabel, Classification, ClassifyControls,
    PhaseCell,
};
pub use cycles::{extract_limit_cycles, LimitCycleOrbit};
pub use spectral::spectral_purity;
pub use rk45::Tolerances;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Coherent amplitudes `(alpha, beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldState {
    pub alpha: Complex64,
    pub beta: Complex64,
}

impl MeanFieldState {
    pub fn new(alpha: Complex64, beta: Complex64) -> Self {
        Self { alpha, beta }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.alpha.re, self.alpha.im, self.beta.re, self.beta.im]
    }

    pub fn from_array(y: &[f64; 4]) -> Self {
        Self {
            alpha: Complex64::new(y[0], y[1]),
            beta: Complex64::new(y[2], y[3]),
        }
    }

    pub fn n_a(&self) -> f64 {
        self.alpha.norm_sqr()
    }

    pub fn n_b(&self) -> f64 {
        self.beta.norm_sqr()
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Euclidean distance in the four real coordinates.
    pub fn distance(&self, other: &Self) -> f64 {
        ((self.alpha - other.alpha).norm_sqr() + (self.beta - other.beta).norm_sqr()).sqrt()
    }
}

/// Right-hand side of the mean-field equations
/// `i dα/dt = (Δa − iκa/2)α + gα(β+β*) + F`,
/// `i dβ/dt = ωb β − iκb(β−β*)/2 + g|α|²`.
pub fn meanfield_rhs(s: &MeanFieldState, p: &SystemParams) -> MeanFieldState {
    let a = s.alpha;
    let b = s.beta;
    let x = b + b.conj();
    let da = -I * (Complex64::new(p.delta_a, -0.5 * p.kappa_a) * a + p.g * a * x + p.force);
    let db = -I * (p.omega_b * b - I * (0.5 * p.kappa_b) * (b - b.conj()) + p.g * a.norm_sqr());
    MeanFieldState::new(da, db)
}

pub(crate) fn rhs_array(p: &SystemParams) -> impl Fn(f64, &[f64; 4]) -> [f64; 4] + '_ {
    move |_, y| meanfield_rhs(&MeanFieldState::from_array(y), p).to_array()
}

/// Mean-field solution sampled on a uniform output grid.
#[derive(Debug, Clone)]
pub struct MeanFieldTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<MeanFieldState>,
    pub steps: usize,
}

impl MeanFieldTrajectory {
    pub fn last(&self) -> Option<&MeanFieldState> {
        self.states.last()
    }
}

/// Integrates from `s0` to `t_final`, sampling every `sample_dt` over
/// `[sample_from, t_final]`.
pub fn integrate(
    s0: MeanFieldState,
    p: &SystemParams,
    t_final: f64,
    sample_from: f64,
    sample_dt: f64,
    tol: &Tolerances,
) -> Result<MeanFieldTrajectory> {
    if !(t_final > 0.0) {
        return Err(Error::InvalidParameter(format!("t_final must be positive, got {t_final}")));
    }
    if !s0.is_finite() {
        return Err(Error::InvalidParameter("non-finite initial state".into()));
    }
    let start = sample_from.clamp(0.0, t_final);
    let mut grid = rk45::uniform_grid(start, t_final, sample_dt);
    if grid.last().is_some_and(|&t| t < t_final) {
        grid.push(t_final);
    }
    let sol = rk45::integrate(rhs_array(p), 0.0, s0.to_array(), &grid, tol)?;
    Ok(MeanFieldTrajectory {
        times: sol.times,
        states: sol.states.iter().map(MeanFieldState::from_array).collect(),
        steps: sol.steps,
    })
}

/// Flows `s` forward by `duration` and returns the end state.
pub fn flow(s: MeanFieldState, p: &SystemParams, duration: f64, tol: &Tolerances) -> Result<MeanFieldState> {
    if duration == 0.0 {
        return Ok(s);
    }
    let sol = rk45::integrate(rhs_array(p), 0.0, s.to_array(), &[duration], tol)?;
    Ok(MeanFieldState::from_array(&sol.states[0]))
}
