use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spectral::{autocorrelation_period, refine_period, upward_crossings};
use super::{integrate, MeanFieldState, Tolerances};
use crate::error::{Error, Result};
use crate::model::SystemParams;

const RINGS: usize = 5;

/// Late-window oscillation diagnostics of one mean-field run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttractorDiagnostics {
    pub d_alpha_r: f64,
    pub d_beta_r: f64,
    pub mean_na: f64,
    pub mean_nb: f64,
}

impl AttractorDiagnostics {
    pub fn new(d_alpha_r: f64, d_beta_r: f64, mean_na: f64, mean_nb: f64) -> Self {
        Self { d_alpha_r, d_beta_r, mean_na, mean_nb }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.d_alpha_r, self.d_beta_r, self.mean_na, self.mean_nb]
    }

    /// Static when neither mode oscillates above `eps_osc`.
    pub fn is_static(&self, eps_osc: f64) -> bool {
        self.d_alpha_r < eps_osc && self.d_beta_r < eps_osc
    }

    pub fn max_distance(&self, other: &Self) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CellLabel {
    FP1,
    FP2,
    LC1only,
    LC1FP1,
    LC2,
    LC2FP1,
    Uncategorized,
}

impl CellLabel {
    /// Label from the number of static and dynamical attractors.
    pub fn from_counts(n_static: usize, n_dynamic: usize) -> Self {
        match (n_static, n_dynamic) {
            (1, 0) => Self::FP1,
            (2, 0) => Self::FP2,
            (0, 1) => Self::LC1only,
            (1, 1) => Self::LC1FP1,
            (0, 2) => Self::LC2,
            (1, 2) => Self::LC2FP1,
            _ => Self::Uncategorized,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::FP1 => "1FP",
            Self::FP2 => "2FP",
            Self::LC1only => "1LC",
            Self::LC1FP1 => "1LC+1FP",
            Self::LC2 => "2LC",
            Self::LC2FP1 => "2LC+1FP",
            Self::Uncategorized => "uncat",
        }
    }
}

impl fmt::Display for CellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CellLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            Self::FP1,
            Self::FP2,
            Self::LC1only,
            Self::LC1FP1,
            Self::LC2,
            Self::LC2FP1,
            Self::Uncategorized,
        ]
        .into_iter()
        .find(|l| l.as_str() == s)
        .ok_or_else(|| Error::Format(format!("unknown phase label {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub delta_a: f64,
    pub f_tilde: f64,
    pub label: CellLabel,
    pub attractors: Vec<AttractorDiagnostics>,
    /// Starts whose integration failed.
    pub excluded: Vec<usize>,
    /// Starts still drifting at the end of the run.
    pub unconverged: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyControls {
    /// Final time in units of `1/κa`.
    pub t_final_kappa: f64,
    /// Diagnostic window length in units of `1/κa`.
    pub window_kappa: f64,
    pub sample_dt: f64,
    pub eps_osc: f64,
    pub eps_tol: f64,
    pub max_clusters: usize,
    pub tolerances: Tolerances,
}

impl Default for ClassifyControls {
    fn default() -> Self {
        Self {
            t_final_kappa: 3000.0,
            window_kappa: 30.0,
            sample_dt: 0.02,
            eps_osc: 5e-3,
            eps_tol: 1e-2,
            max_clusters: 3,
            tolerances: Tolerances::default(),
        }
    }
}

impl ClassifyControls {
    pub fn validate(&self) -> Result<()> {
        let ok = self.t_final_kappa > 0.0
            && self.window_kappa > 0.0
            && self.window_kappa < self.t_final_kappa
            && self.sample_dt > 0.0
            && self.eps_osc > 0.0
            && self.eps_tol > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid classification controls {self:?}")))
        }
    }
}

/// Full result of a classification including the per-start bookkeeping.
#[derive(Debug, Clone)]
pub struct Classification {
    pub cell: PhaseCell,
    /// Cluster index of each start (`None` for excluded starts).
    pub assignment: Vec<Option<usize>>,
    /// First start of each cluster.
    pub representatives: Vec<usize>,
    /// State at `t_final` for each start.
    pub final_states: Vec<Option<MeanFieldState>>,
}

/// Concentric-ring covering of the disk `|alpha| <= radius` with `n` points.
pub fn initial_grid(n: usize, radius: f64) -> Vec<Complex64> {
    ring_grid(n, radius, 0.0)
}

/// The default 157-point covering of `|alpha| <= 5`.
pub fn default_initial_grid() -> Vec<Complex64> {
    initial_grid(157, 5.0)
}

/// `initial_grid(n)` followed by the same layout rotated by half an angular
/// step, so the refined grid always contains the coarse one.
pub fn refined_grid(n: usize, radius: f64) -> Vec<Complex64> {
    let mut out = ring_grid(n, radius, 0.0);
    out.extend(ring_grid(n, radius, 0.5).into_iter().skip(1));
    out
}

fn ring_grid(n: usize, radius: f64, offset: f64) -> Vec<Complex64> {
    if n == 0 {
        return Vec::new();
    }
    let mut out = vec![Complex64::new(0.0, 0.0)];
    for (k, &m) in ring_counts(n - 1).iter().enumerate() {
        let r = radius * (k + 1) as f64 / RINGS as f64;
        for j in 0..m {
            out.push(Complex64::from_polar(r, 2.0 * PI * (j as f64 + offset) / m as f64));
        }
    }
    out
}

/// Counts proportional to ring radius, rounded by largest remainder.
fn ring_counts(total: usize) -> [usize; RINGS] {
    let weight: usize = (1..=RINGS).sum();
    let exact: Vec<f64> = (1..=RINGS).map(|k| total as f64 * k as f64 / weight as f64).collect();
    let mut counts = [0usize; RINGS];
    for (c, e) in counts.iter_mut().zip(&exact) {
        *c = e.floor() as usize;
    }
    let mut order: Vec<usize> = (0..RINGS).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.total_cmp(&ra).then(b.cmp(&a))
    });
    let missing = total - counts.iter().sum::<usize>();
    for &k in order.iter().take(missing) {
        counts[k] += 1;
    }
    counts
}

/// Greedy max-norm agglomeration: each vector joins the first cluster whose
/// representative lies within `eps_tol`, otherwise it opens a new one.
pub fn cluster_diagnostics(diags: &[AttractorDiagnostics], eps_tol: f64) -> Vec<usize> {
    let mut reps: Vec<AttractorDiagnostics> = Vec::new();
    diags
        .iter()
        .map(|d| match reps.iter().position(|r| r.max_distance(d) <= eps_tol) {
            Some(k) => k,
            None => {
                reps.push(*d);
                reps.len() - 1
            }
        })
        .collect()
}

struct StartOutcome {
    diagnostics: AttractorDiagnostics,
    converged: bool,
    final_state: MeanFieldState,
}

pub fn classify_point(
    delta_a: f64,
    f_tilde: f64,
    base: &SystemParams,
    grid: &[Complex64],
    controls: &ClassifyControls,
) -> Result<PhaseCell> {
    classify_point_detailed(delta_a, f_tilde, base, grid, controls).map(|c| c.cell)
}

pub fn classify_point_detailed(
    delta_a: f64,
    f_tilde: f64,
    base: &SystemParams,
    grid: &[Complex64],
    controls: &ClassifyControls,
) -> Result<Classification> {
    if grid.is_empty() {
        return Err(Error::EmptyInput("initial-condition grid"));
    }
    controls.validate()?;
    let p = SystemParams { delta_a, force: f_tilde, ..*base };
    p.validate()?;

    let outcomes: Vec<Option<StartOutcome>> = grid
        .par_iter()
        .map(|&alpha0| run_start(MeanFieldState::new(alpha0, Complex64::new(0.0, 0.0)), &p, controls).ok())
        .collect();

    let excluded: Vec<usize> = (0..grid.len()).filter(|&i| outcomes[i].is_none()).collect();
    let kept: Vec<usize> = (0..grid.len()).filter(|&i| outcomes[i].is_some()).collect();
    let diags: Vec<AttractorDiagnostics> = kept.iter().map(|&i| outcomes[i].as_ref().unwrap().diagnostics).collect();
    let ids = cluster_diagnostics(&diags, controls.eps_tol);

    let mut assignment = vec![None; grid.len()];
    let mut representatives = Vec::new();
    for (&i, &k) in kept.iter().zip(&ids) {
        assignment[i] = Some(k);
        if k == representatives.len() {
            representatives.push(i);
        }
    }
    let attractors: Vec<AttractorDiagnostics> =
        representatives.iter().map(|&i| outcomes[i].as_ref().unwrap().diagnostics).collect();
    let unconverged: Vec<usize> = kept.iter().copied().filter(|&i| !outcomes[i].as_ref().unwrap().converged).collect();

    let n_static = attractors.iter().filter(|d| d.is_static(controls.eps_osc)).count();
    let label = if kept.is_empty() || !unconverged.is_empty() || attractors.len() > controls.max_clusters {
        CellLabel::Uncategorized
    } else {
        CellLabel::from_counts(n_static, attractors.len() - n_static)
    };

    Ok(Classification {
        cell: PhaseCell {
            delta_a,
            f_tilde,
            label,
            attractors,
            excluded,
            unconverged,
        },
        assignment,
        representatives,
        final_states: outcomes.iter().map(|o| o.as_ref().map(|o| o.final_state)).collect(),
    })
}

fn run_start(s0: MeanFieldState, p: &SystemParams, c: &ClassifyControls) -> Result<StartOutcome> {
    let t_final = c.t_final_kappa / p.kappa_a;
    let window = c.window_kappa / p.kappa_a;
    let traj = integrate(s0, p, t_final, t_final - window, c.sample_dt, &c.tolerances)?;
    if traj.states.iter().any(|s| !s.is_finite()) {
        return Err(Error::Stiffness { t: t_final, h: 0.0 });
    }
    let full = window_diagnostics(&traj.states, c.sample_dt);
    let half = traj.states.len() / 2;
    let early = window_diagnostics(&traj.states[..half], c.sample_dt);
    let late = window_diagnostics(&traj.states[half..], c.sample_dt);
    Ok(StartOutcome {
        diagnostics: full,
        converged: early.max_distance(&late) <= c.eps_tol,
        final_state: *traj.last().unwrap(),
    })
}

/// Peak-to-peak of the real quadratures and populations averaged over the
/// whole oscillation periods contained in the window.
pub(crate) fn window_diagnostics(states: &[MeanFieldState], dt: f64) -> AttractorDiagnostics {
    let mut ext = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    for s in states {
        ext = [ext[0].min(s.alpha.re), ext[1].max(s.alpha.re), ext[2].min(s.beta.re), ext[3].max(s.beta.re)];
    }
    let x: Vec<f64> = states.iter().map(|s| s.alpha.re).collect();
    let span = (states.len() - 1) as f64 * dt;
    let hi = match autocorrelation_period(&x, dt) {
        Some(t) if ext[1] - ext[0] > 1e-9 && t < span => {
            let period = refine_period(&upward_crossings(&x, dt), t);
            (span / period).floor() * period
        }
        _ => span,
    };
    let lo = 0.0;
    AttractorDiagnostics {
        d_alpha_r: ext[1] - ext[0],
        d_beta_r: ext[3] - ext[2],
        mean_na: span_mean(states, dt, lo, hi, |s| s.n_a()),
        mean_nb: span_mean(states, dt, lo, hi, |s| s.n_b()),
    }
}

fn span_mean(states: &[MeanFieldState], dt: f64, lo: f64, hi: f64, f: impl Fn(&MeanFieldState) -> f64) -> f64 {
    if hi <= lo {
        return states.iter().map(&f).sum::<f64>() / states.len() as f64;
    }
    let value = |t: f64| {
        let k = ((t / dt).floor() as usize).min(states.len() - 2);
        let w = t / dt - k as f64;
        (1.0 - w) * f(&states[k]) + w * f(&states[k + 1])
    };
    let k0 = (lo / dt).ceil() as usize;
    let k1 = (hi / dt).floor() as usize;
    let mut acc = 0.0;
    let mut prev_t = lo;
    let mut prev_v = value(lo);
    for k in k0..=k1 {
        let t = k as f64 * dt;
        let v = f(&states[k]);
        acc += 0.5 * (prev_v + v) * (t - prev_t);
        prev_t = t;
        prev_v = v;
    }
    let v_hi = value(hi);
    acc += 0.5 * (prev_v + v_hi) * (hi - prev_t);
    acc / (hi - lo)
}
