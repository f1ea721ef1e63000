use serde::{Deserialize, Serialize};

use super::survival::SurvivalCurve;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdControls {
    /// Candidate thresholds are `0` and the event-time quantiles
    /// `step, 2 step, ..` up to `max_quantile`.
    pub quantile_step: f64,
    pub max_quantile: f64,
    /// Largest accepted difference of head and tail slopes, in standard errors.
    pub z_crit: f64,
    /// The tail ends where fewer than this fraction of the records at `t0`
    /// (and fewer than `min_at_risk`) remain at risk.
    pub tail_fraction: f64,
    pub min_at_risk: usize,
    pub min_events: usize,
    /// Number of following candidates that must also pass.
    pub confirm: usize,
}

impl Default for ThresholdControls {
    fn default() -> Self {
        Self {
            quantile_step: 0.002,
            max_quantile: 0.95,
            z_crit: 5.0,
            tail_fraction: 0.05,
            min_at_risk: 10,
            min_events: 10,
            confirm: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCandidate {
    pub t0: f64,
    /// Mean slope of `-ln S` over the first half of the events beyond `t0`.
    pub k_head: f64,
    /// Same over the second half.
    pub k_tail: f64,
    /// Largest slope difference between a head window and the tail, in
    /// standard errors.
    pub z: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSelection {
    pub t0: f64,
    pub candidates: Vec<ThresholdCandidate>,
}

fn candidate_times(c: &SurvivalCurve, ctl: &ThresholdControls) -> Vec<f64> {
    let total = c.n_events();
    let mut out = vec![0.0];
    let mut cum = 0;
    let mut k = 0;
    let steps = (ctl.max_quantile / ctl.quantile_step + 1e-9).floor() as usize;
    for i in 1..=steps {
        let q = i as f64 * ctl.quantile_step;
        let need = ((q * total as f64) - 1e-9).ceil() as usize;
        while k < c.times.len() && cum < need {
            cum += c.events[k];
            k += 1;
        }
        if k > 0 && c.times[k - 1] > *out.last().unwrap() {
            out.push(c.times[k - 1]);
        }
    }
    out
}

/// Head windows, as fractions of the events beyond `t0`, each compared with
/// the chord over the second half.
const HEAD_FRACTIONS: [f64; 3] = [0.05, 0.2, 0.5];

/// Prefix sums over the event times of a curve.
struct Prefix<'a> {
    c: &'a SurvivalCurve,
    /// `events[..k]`
    events: Vec<usize>,
    /// Greenwood terms of `ln S` over `[..k]`
    greenwood: Vec<f64>,
}

impl<'a> Prefix<'a> {
    fn new(c: &'a SurvivalCurve) -> Self {
        let mut events = vec![0];
        let mut greenwood = vec![0.0];
        for (&n, &d) in c.at_risk.iter().zip(&c.events) {
            events.push(events.last().unwrap() + d);
            let g = if n > d { d as f64 / (n as f64 * (n - d) as f64) } else { f64::INFINITY };
            greenwood.push(greenwood.last().unwrap() + g);
        }
        Self { c, events, greenwood }
    }

    fn evaluate(&self, t0: f64, ctl: &ThresholdControls) -> Option<ThresholdCandidate> {
        let c = self.c;
        let first = c.times.partition_point(|&t| t <= t0);
        let n0 = *c.at_risk.get(first)?;
        let floor = ctl.min_at_risk.max((ctl.tail_fraction * n0 as f64).ceil() as usize);
        // at-risk counts decrease, so the usable range is a prefix
        let mut stop = first + c.at_risk[first..].partition_point(|&n| n >= floor);
        if stop > first && c.at_risk[stop - 1] == c.events[stop - 1] {
            stop -= 1;
        }
        if stop <= first {
            return None;
        }
        let n_events = self.events[stop] - self.events[first];
        if n_events < ctl.min_events {
            return None;
        }
        // event index at which a fraction of the usable events is reached
        let reach = |frac: f64| {
            let need = self.events[first] + ((frac * n_events as f64).ceil() as usize).max(1);
            first + self.events[first + 1..=stop].partition_point(|&e| e < need)
        };
        let mid = reach(0.5);
        let end = stop - 1;
        let (tm, te) = (c.times[mid], c.times[end]);
        if !(tm > t0 && te > tm) {
            return None;
        }
        let ls = |t: f64| c.survival_at(t).ln();
        // chord slope over (a, b] with its Greenwood variance; `ka`, `kb` are
        // the event-index bounds
        let chord = |a: f64, ka: usize, b: f64, kb: usize| {
            ((ls(a) - ls(b)) / (b - a), (self.greenwood[kb] - self.greenwood[ka]) / (b - a).powi(2))
        };
        let (k_tail, var_tail) = chord(tm, mid + 1, te, end + 1);
        let (k_head, _) = chord(t0, first, tm, mid + 1);
        let z = HEAD_FRACTIONS
            .iter()
            .map(|&f| reach(f))
            .filter(|&k| c.times[k] > t0)
            .map(|k| {
                let (kh, var) = chord(t0, first, c.times[k], k + 1);
                (kh - k_tail).abs() / (var + var_tail).sqrt()
            })
            .fold(0.0, f64::max);
        Some(ThresholdCandidate {
            t0,
            k_head,
            k_tail,
            z,
            accepted: z <= ctl.z_crit && k_tail > 0.0,
        })
    }
}

/// Smallest candidate threshold beyond which `ln S` is straight: the slopes
/// of log-survival chords starting at `t0` must agree with the chord over
/// the second half of the remaining events within `z_crit` Greenwood
/// standard errors.
pub fn select_t0(curve: &SurvivalCurve, controls: &ThresholdControls) -> Result<ThresholdSelection> {
    if curve.times.len() < 10 {
        return Err(Error::NoLinearTail { candidates: 0 });
    }
    let prefix = Prefix::new(curve);
    let mut candidates = Vec::new();
    for t0 in candidate_times(curve, controls) {
        let Some(c) = prefix.evaluate(t0, controls) else { break };
        candidates.push(c);
    }
    let m = controls.confirm;
    (0..candidates.len().saturating_sub(m))
        .find(|&i| candidates[i..=i + m].iter().all(|c| c.accepted))
        .map(|i| ThresholdSelection { t0: candidates[i].t0, candidates: candidates.clone() })
        .ok_or(Error::NoLinearTail { candidates: candidates.len() })
}
