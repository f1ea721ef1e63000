use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dwell::DwellRecord;
use crate::error::{Error, Result};
use crate::hmm::LcState;
use crate::qjump::{trajectory_rng, trajectory_seed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateControls {
    pub min_records: usize,
    pub n_bootstrap: usize,
    pub confidence: f64,
    pub seed: u64,
}

impl Default for RateControls {
    fn default() -> Self {
        Self { min_records: 20, n_bootstrap: 1000, confidence: 0.95, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub state: LcState,
    pub k: f64,
    pub t0: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Bootstrap standard deviation of `k`.
    pub sigma: f64,
    pub n_events: usize,
    pub n_censored: usize,
}

/// Closed-form MLE of the conditional exponential model over `(excess, observed)`.
fn mle(samples: impl Iterator<Item = (f64, bool)>) -> f64 {
    let (events, exposure) = samples.fold((0usize, 0.0), |(e, x), (dt, obs)| (e + usize::from(obs), x + dt));
    events as f64 / exposure
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Escape rate from `S(t | T >= t0) = exp(-k (t - t0))` with a percentile
/// bootstrap interval. Uses the incident records longer than `t0`; all
/// records must belong to the same state.
pub fn fit_conditional_rate(dwells: &[DwellRecord], t0: f64, controls: &RateControls) -> Result<RateFit> {
    if !(t0 >= 0.0) || !(controls.confidence > 0.0 && controls.confidence < 1.0) {
        return Err(Error::InvalidParameter("t0 must be non-negative and confidence in (0, 1)".into()));
    }
    let eligible: Vec<(f64, bool)> = dwells
        .iter()
        .filter(|d| d.is_incident() && d.duration > t0)
        .map(|d| (d.duration - t0, d.exit_observed))
        .collect();
    let state = match dwells.iter().find(|d| d.is_incident()) {
        Some(d) => d.state,
        None => return Err(Error::FitRefused { eligible: 0, events: 0, required: controls.min_records }),
    };
    if dwells.iter().any(|d| d.is_incident() && d.state != state) {
        return Err(Error::InvalidParameter("dwell records of both states passed to one rate fit".into()));
    }
    let n_events = eligible.iter().filter(|s| s.1).count();
    if eligible.len() < controls.min_records.max(1) || n_events == 0 {
        return Err(Error::FitRefused { eligible: eligible.len(), events: n_events, required: controls.min_records });
    }
    let k = mle(eligible.iter().copied());
    let n = eligible.len();
    let mut boot: Vec<f64> = (0..controls.n_bootstrap)
        .into_par_iter()
        .map(|b| {
            let mut rng = trajectory_rng(trajectory_seed(controls.seed, b as u64));
            mle((0..n).map(|_| eligible[rng.random_range(0..n)]))
        })
        .collect();
    let (ci_low, ci_high, sigma) = if boot.is_empty() {
        (k, k, 0.0)
    } else {
        boot.sort_by(f64::total_cmp);
        let alpha = 1.0 - controls.confidence;
        let mean = boot.iter().sum::<f64>() / boot.len() as f64;
        let var = boot.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (boot.len().max(2) - 1) as f64;
        // percentile bounds clamped to contain the point estimate
        (quantile(&boot, alpha / 2.0).min(k), quantile(&boot, 1.0 - alpha / 2.0).max(k), var.sqrt())
    };
    Ok(RateFit { state, k, t0, ci_low, ci_high, sigma, n_events, n_censored: n - n_events })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(duration: f64, exit_observed: bool) -> DwellRecord {
        DwellRecord { trajectory: 0, start: 0, state: LcState::LC1, duration, entry_observed: true, exit_observed }
    }

    fn controls() -> RateControls {
        RateControls { min_records: 3, n_bootstrap: 200, ..Default::default() }
    }

    #[test]
    fn closed_form() {
        let t0 = 2.0;
        let d = vec![rec(t0 + 1.0, true), rec(t0 + 2.0, true), rec(t0 + 3.0, true)];
        let f = fit_conditional_rate(&d, t0, &controls()).unwrap();
        assert!((f.k - 0.5).abs() < 1e-15);
        assert!(f.ci_low <= f.k && f.k <= f.ci_high);
        let mut d2 = d.clone();
        d2.push(rec(t0 + 4.0, false));
        let f2 = fit_conditional_rate(&d2, t0, &controls()).unwrap();
        assert!((f2.k - 0.3).abs() < 1e-15);
        assert_eq!((f2.n_events, f2.n_censored), (3, 1));
    }

    #[test]
    fn short_and_non_incident_records_do_not_count() {
        let mut d = vec![rec(3.0, true), rec(4.0, true), rec(5.0, true)];
        let base = fit_conditional_rate(&d, 2.0, &controls()).unwrap();
        d.push(rec(1.0, true));
        d.push(rec(2.0, false));
        d.push(DwellRecord { entry_observed: false, ..rec(30.0, true) });
        let more = fit_conditional_rate(&d, 2.0, &controls()).unwrap();
        assert_eq!(base, more);
    }

    #[test]
    fn refuses_small_samples() {
        let d = vec![rec(3.0, true), rec(4.0, true)];
        assert!(matches!(
            fit_conditional_rate(&d, 0.0, &RateControls::default()),
            Err(Error::FitRefused { eligible: 2, events: 2, required: 20 })
        ));
        let censored = vec![rec(3.0, false); 30];
        assert!(fit_conditional_rate(&censored, 0.0, &RateControls::default()).is_err());
    }

    #[test]
    fn mixed_states_rejected() {
        let d = vec![rec(3.0, true), rec(4.0, true), DwellRecord { state: LcState::LC2, ..rec(5.0, true) }];
        assert!(matches!(fit_conditional_rate(&d, 0.0, &controls()), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let d: Vec<_> = (1..60).map(|k| rec(k as f64 * 0.7, k % 5 != 0)).collect();
        let a = fit_conditional_rate(&d, 0.0, &controls()).unwrap();
        let b = fit_conditional_rate(&d, 0.0, &controls()).unwrap();
        assert_eq!(a, b);
        assert!(a.ci_low < a.k && a.k < a.ci_high && a.sigma > 0.0);
    }
}
