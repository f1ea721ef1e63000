use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::circular::{bin_center, phase_bin};
use super::events::SwitchEvent;
use crate::error::{Error, Result};
use crate::hmm::{LcState, StateSequence};
use crate::qjump::{BinSpec, Histogram2D, Projection, TrajectoryRecord};
use crate::stats::Direction;

pub const DEFAULT_PHASE_BINS: usize = 72;

/// Stationary densities below this multiple of the uniform density are masked.
pub const HAZARD_FLOOR: f64 = 1e-4;

fn optical_phase(r: &TrajectoryRecord, k: usize) -> f64 {
    r.alpha[k].arg()
}

fn dt_of(records: &[TrajectoryRecord]) -> Result<f64> {
    let first = records.first().ok_or(Error::EmptyInput("trajectory records"))?;
    if records.iter().any(|r| r.dt_sample != first.dt_sample) {
        return Err(Error::InvalidParameter("records differ in sampling interval".into()));
    }
    Ok(first.dt_sample)
}

/// Record index at lag `lag` from an event, if inside the analysed window.
fn lagged(records: &[TrajectoryRecord], e: &SwitchEvent, lag: i64) -> Option<(usize, usize)> {
    let r = records.get(e.trajectory)?;
    let k = e.switch_index as i64 + lag;
    (k >= r.transient_index() as i64 && k < r.len() as i64).then_some((e.trajectory, k as usize))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHistogram {
    pub tau: f64,
    pub histogram: Histogram2D,
    pub events_used: usize,
    /// Events whose window does not contain this lag.
    pub events_excluded: usize,
}

/// Histograms of the projected amplitude at `t_switch + tau` over the events.
/// Without an explicit range all snapshots share the span of their samples.
/// A lag outside every event window yields an all-zero histogram.
pub fn conditioned_density(
    events: &[SwitchEvent],
    records: &[TrajectoryRecord],
    taus: &[f64],
    projection: Projection,
    bins: BinSpec,
) -> Result<Vec<SnapshotHistogram>> {
    if events.is_empty() {
        return Err(Error::EmptyInput("switching events"));
    }
    let dt = dt_of(records)?;
    let snapshots: Vec<(f64, Vec<(f64, f64)>, usize)> = taus
        .iter()
        .map(|&tau| {
            let lag = (tau / dt).round() as i64;
            let pts: Vec<(f64, f64)> = events
                .iter()
                .filter_map(|e| lagged(records, e, lag))
                .map(|(t, k)| projection.point(&records[t], k))
                .collect();
            let excluded = events.len() - pts.len();
            (tau, pts, excluded)
        })
        .collect();
    let bins = match bins.range {
        Some(_) => bins,
        None => {
            let all = snapshots.iter().flat_map(|s| s.1.iter());
            let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
            for &(x, y) in all {
                (x0, x1, y0, y1) = (x0.min(x), x1.max(x), y0.min(y), y1.max(y));
            }
            let pad = |lo: f64, hi: f64| if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
            let ((x0, x1), (y0, y1)) = (pad(x0, x1), pad(y0, y1));
            BinSpec { range: x0.is_finite().then_some([x0, x1, y0, y1]), ..bins }
        }
    };
    let [x0, x1, y0, y1] = bins.range.ok_or(Error::EmptyInput("samples at the requested lags"))?;
    snapshots
        .into_iter()
        .map(|(tau, pts, events_excluded)| {
            let histogram = if pts.is_empty() {
                Histogram2D {
                    projection,
                    x_range: (x0, x1),
                    y_range: (y0, y1),
                    nx: bins.nx,
                    ny: bins.ny,
                    mass: vec![0.0; bins.nx * bins.ny],
                    samples: 0,
                    dropped: 0,
                }
            } else {
                Histogram2D::from_points(&pts, projection, bins)?
            };
            Ok(SnapshotHistogram {
                tau,
                histogram,
                events_used: pts.len(),
                events_excluded,
            })
        })
        .collect()
}

/// Lag window of exit-phase histograms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub bins: usize,
    pub tau_min: f64,
    pub tau_max: f64,
}

impl PhaseGrid {
    /// 72 bins and lags in `[-15, 10] / kappa_a`.
    pub fn standard(kappa_a: f64) -> Self {
        Self { bins: DEFAULT_PHASE_BINS, tau_min: -15.0 / kappa_a, tau_max: 10.0 / kappa_a }
    }
}

/// `P(phi_a, tau | i -> j)` with each lag column a density over `[0, 2 pi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseHistogram {
    pub direction: Direction,
    pub bins: usize,
    pub dt: f64,
    /// Sample offsets relative to the switch; `tau = lag * dt`.
    pub lags: Vec<i64>,
    /// `density[l][b]`; zero columns have no support.
    pub density: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
    pub n_events: usize,
}

impl PhaseHistogram {
    pub fn bin_width(&self) -> f64 {
        TAU / self.bins as f64
    }

    pub fn taus(&self) -> Vec<f64> {
        self.lags.iter().map(|&l| l as f64 * self.dt).collect()
    }

    pub fn column_at_lag(&self, lag: i64) -> Option<&[f64]> {
        self.lags.iter().position(|&l| l == lag).map(|i| self.density[i].as_slice())
    }
}

fn normalize(counts: &[u64], width: f64) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return vec![0.0; counts.len()];
    }
    counts.iter().map(|&c| c as f64 / (total as f64 * width)).collect()
}

/// Exit-phase histograms of the events in `direction`.
pub fn phase_histogram(
    events: &[SwitchEvent],
    records: &[TrajectoryRecord],
    direction: Direction,
    grid: &PhaseGrid,
) -> Result<PhaseHistogram> {
    let selected: Vec<&SwitchEvent> = events.iter().filter(|e| e.direction == direction).collect();
    if selected.is_empty() {
        return Err(Error::EmptyInput("switching events"));
    }
    if grid.bins == 0 || !(grid.tau_max >= grid.tau_min) {
        return Err(Error::InvalidParameter("phase grid needs bins and an ordered lag window".into()));
    }
    let dt = dt_of(records)?;
    let lags: Vec<i64> = ((grid.tau_min / dt - 1e-9).ceil() as i64..=(grid.tau_max / dt + 1e-9).floor() as i64).collect();
    let nb = grid.bins;
    let counts = selected
        .par_iter()
        .fold(
            || vec![0u64; lags.len() * nb],
            |mut acc, e| {
                for (l, &lag) in lags.iter().enumerate() {
                    if let Some((t, k)) = lagged(records, e, lag) {
                        acc[l * nb + phase_bin(optical_phase(&records[t], k), nb)] += 1;
                    }
                }
                acc
            },
        )
        .reduce(|| vec![0u64; lags.len() * nb], |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect());
    let width = TAU / nb as f64;
    let density = counts.chunks(nb).map(|c| normalize(c, width)).collect();
    Ok(PhaseHistogram {
        direction,
        bins: nb,
        dt,
        lags,
        density,
        counts: counts.chunks(nb).map(|c| c.iter().sum::<u64>() as usize).collect(),
        n_events: selected.len(),
    })
}

/// Optical phases of the events in `direction` at a given lag.
pub fn exit_phases(events: &[SwitchEvent], records: &[TrajectoryRecord], direction: Direction, lag: i64) -> Vec<f64> {
    events
        .iter()
        .filter(|e| e.direction == direction)
        .filter_map(|e| lagged(records, e, lag))
        .map(|(t, k)| optical_phase(&records[t], k))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDensity {
    pub state: LcState,
    pub density: Vec<f64>,
    pub samples: usize,
}

/// `P_stat(phi_a | state)` over all labelled samples; `sequences[i]` decodes
/// `records[i]`.
pub fn stationary_phase_distribution(
    records: &[TrajectoryRecord],
    sequences: &[StateSequence],
    state: LcState,
    bins: usize,
) -> Result<PhaseDensity> {
    if records.len() != sequences.len() {
        return Err(Error::DimensionMismatch { expected: records.len(), got: sequences.len() });
    }
    if bins == 0 {
        return Err(Error::InvalidParameter("phase grid needs at least one bin".into()));
    }
    dt_of(records)?;
    let mut counts = vec![0u64; bins];
    for (r, s) in records.iter().zip(sequences) {
        if s.offset + s.labels.len() > r.len() {
            return Err(Error::DimensionMismatch { expected: r.len(), got: s.offset + s.labels.len() });
        }
        for (i, _) in s.labels.iter().enumerate().filter(|(_, &l)| l == state) {
            counts[phase_bin(optical_phase(r, s.offset + i), bins)] += 1;
        }
    }
    let samples = counts.iter().sum::<u64>() as usize;
    if samples == 0 {
        return Err(Error::EmptyInput("samples in the requested state"));
    }
    Ok(PhaseDensity { state, density: normalize(&counts, TAU / bins as f64), samples })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardProfile {
    pub direction: Direction,
    pub phases: Vec<f64>,
    /// Rescaled to unit maximum; `None` where the stationary density is below the floor.
    pub hazard: Vec<Option<f64>>,
    pub normalization: String,
    /// `P(tau | phi_a)` on the full grid, unscaled, with the same mask
    /// convention; rows follow `lags`.
    pub conditional: Vec<Vec<Option<f64>>>,
    pub lags: Vec<i64>,
}

/// Exit-phase histogram divided by the stationary phase density of the basin
/// occupied at each lag; the hazard is the `tau = 0` column.
pub fn hazard(hist: &PhaseHistogram, stat_from: &PhaseDensity, stat_to: &PhaseDensity) -> Result<HazardProfile> {
    let d = hist.direction;
    if stat_from.state != d.from_state() || stat_to.state != d.to_state() {
        return Err(Error::InvalidParameter("stationary densities do not match the switching direction".into()));
    }
    if stat_from.density.len() != hist.bins || stat_to.density.len() != hist.bins {
        return Err(Error::DimensionMismatch { expected: hist.bins, got: stat_from.density.len() });
    }
    let floor = HAZARD_FLOOR / TAU;
    let ratio = |p: f64, s: f64| (s >= floor).then(|| p / s);
    let conditional: Vec<Vec<Option<f64>>> = hist
        .lags
        .iter()
        .zip(&hist.density)
        .map(|(&lag, col)| {
            let stat = if lag <= 0 { stat_from } else { stat_to };
            col.iter().zip(&stat.density).map(|(&p, &s)| ratio(p, s)).collect()
        })
        .collect();
    let zero = hist
        .lags
        .iter()
        .position(|&l| l == 0)
        .ok_or_else(|| Error::InvalidParameter("lag grid does not contain the switching time".into()))?;
    let raw = &conditional[zero];
    let max = raw.iter().flatten().cloned().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::DegenerateHazard);
    }
    Ok(HazardProfile {
        direction: d,
        phases: (0..hist.bins).map(|k| bin_center(k, hist.bins)).collect(),
        hazard: raw.iter().map(|v| v.map(|h| h / max)).collect(),
        normalization: "unit_max".into(),
        conditional,
        lags: hist.lags.clone(),
    })
}
