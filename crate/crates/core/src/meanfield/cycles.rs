use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::classify::{classify_point_detailed, window_diagnostics};
use super::spectral::{autocorrelation_period, refine_period, spectral_purity, upward_crossings};
use super::{flow, integrate, meanfield_rhs, rk45, AttractorDiagnostics, ClassifyControls, MeanFieldState, Tolerances};
use crate::error::{Error, Result};
use crate::model::SystemParams;

const ORBIT_SAMPLES: usize = 512;

/// One period of a mean-field limit cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCycleOrbit {
    pub period: f64,
    /// `ORBIT_SAMPLES + 1` uniformly spaced times over `[0, period]`.
    pub times: Vec<f64>,
    pub samples: Vec<MeanFieldState>,
    pub diagnostics: AttractorDiagnostics,
    /// Fraction of late-window spectral power at the fundamental and its harmonics.
    pub spectral_purity: f64,
}

impl LimitCycleOrbit {
    pub fn closure_error(&self) -> f64 {
        self.samples[0].distance(self.samples.last().unwrap())
    }

    /// Time average of `|alpha|^2` over the period.
    pub fn mean_na(&self) -> f64 {
        period_mean(&self.samples, |s| s.n_a())
    }

    pub fn mean_nb(&self) -> f64 {
        period_mean(&self.samples, |s| s.n_b())
    }
}

fn period_mean(samples: &[MeanFieldState], f: impl Fn(&MeanFieldState) -> f64) -> f64 {
    // the last sample repeats the first
    let n = samples.len() - 1;
    samples[..n].iter().map(f).sum::<f64>() / n as f64
}

fn tight() -> Tolerances {
    Tolerances { rtol: 1e-12, atol: 1e-14, ..Tolerances::default() }
}

/// Finds every dynamical attractor reached from `grid` and returns one period
/// of each, ordered by mean optical population (LC1 first).
pub fn extract_limit_cycles(
    p: &SystemParams,
    grid: &[Complex64],
    controls: &ClassifyControls,
) -> Result<Vec<LimitCycleOrbit>> {
    let cls = classify_point_detailed(p.delta_a, p.force, p, grid, controls)?;
    let mut orbits = Vec::new();
    for (k, d) in cls.cell.attractors.iter().enumerate() {
        if d.is_static(controls.eps_osc) {
            continue;
        }
        let start = cls.final_states[cls.representatives[k]].expect("representative was integrated");
        orbits.push(trace_orbit(start, p, controls)?);
    }
    if orbits.is_empty() {
        return Err(Error::NoAttractor);
    }
    orbits.sort_by(|a, b| a.diagnostics.mean_na.total_cmp(&b.diagnostics.mean_na));
    Ok(orbits)
}

fn trace_orbit(on_cycle: MeanFieldState, p: &SystemParams, c: &ClassifyControls) -> Result<LimitCycleOrbit> {
    let window = c.window_kappa / p.kappa_a;
    let dt = c.sample_dt;
    let traj = integrate(on_cycle, p, window, 0.0, dt, &tight())?;
    let x: Vec<f64> = traj.states.iter().map(|s| s.alpha.re).collect();
    let diagnostics = window_diagnostics(&traj.states, dt);

    let rough = autocorrelation_period(&x, dt).ok_or(Error::NoAttractor)?;
    let refined = refine_period(&upward_crossings(&x, dt), rough);
    let level = x.iter().sum::<f64>() / x.len() as f64;

    // Put the start exactly on the section Re(alpha) = level, then solve for
    // the first return time.
    let first = upward_crossings(&x, dt)[0];
    let mut s0 = flow(on_cycle, p, first, &tight())?;
    for _ in 0..20 {
        let g = s0.alpha.re - level;
        let dg = meanfield_rhs(&s0, p).alpha.re;
        if g.abs() < 1e-14 || dg == 0.0 {
            break;
        }
        s0 = flow_signed(s0, p, -g / dg)?;
    }
    let mut period = refined;
    let mut end = flow(s0, p, period, &tight())?;
    for _ in 0..20 {
        let g = end.alpha.re - level;
        let dg = meanfield_rhs(&end, p).alpha.re;
        if g.abs() < 1e-14 || dg == 0.0 {
            break;
        }
        let step = -g / dg;
        period += step;
        end = flow_signed(end, p, step)?;
    }

    let grid: Vec<f64> = (0..=ORBIT_SAMPLES).map(|k| period * k as f64 / ORBIT_SAMPLES as f64).collect();
    let sol = rk45::integrate(super::rhs_array(p), 0.0, s0.to_array(), &grid, &tight())?;
    Ok(LimitCycleOrbit {
        period,
        times: sol.times,
        samples: sol.states.iter().map(MeanFieldState::from_array).collect(),
        diagnostics,
        spectral_purity: spectral_purity(&x),
    })
}

fn flow_signed(s: MeanFieldState, p: &SystemParams, dt: f64) -> Result<MeanFieldState> {
    if dt >= 0.0 {
        return flow(s, p, dt, &tight());
    }
    // integrate the reversed flow
    let back = |_: f64, y: &[f64; 4]| {
        let d = meanfield_rhs(&MeanFieldState::from_array(y), p).to_array();
        [-d[0], -d[1], -d[2], -d[3]]
    };
    let sol = rk45::integrate(back, 0.0, s.to_array(), &[-dt], &tight())?;
    Ok(MeanFieldState::from_array(&sol.states[0]))
}
