use serde::{Deserialize, Serialize};

use super::dwell::DwellRecord;

/// Product-limit estimate evaluated at the distinct event times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
    pub at_risk: Vec<usize>,
    pub events: Vec<usize>,
    /// Records entering the estimate, censored ones included.
    pub n_records: usize,
    pub n_censored: usize,
}

impl SurvivalCurve {
    /// Kaplan-Meier estimate from `(duration, event_observed)` pairs. A
    /// record censored at an event time is still at risk at that time.
    pub fn from_samples(samples: &[(f64, bool)]) -> Self {
        let mut sorted: Vec<(f64, bool)> = samples.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = sorted.len();
        let mut curve = SurvivalCurve {
            times: vec![],
            survival: vec![],
            at_risk: vec![],
            events: vec![],
            n_records: n,
            n_censored: sorted.iter().filter(|s| !s.1).count(),
        };
        let mut s = 1.0;
        let mut i = 0;
        while i < n {
            let t = sorted[i].0;
            let mut j = i;
            let mut d = 0;
            while j < n && sorted[j].0 == t {
                d += usize::from(sorted[j].1);
                j += 1;
            }
            if d > 0 {
                let at_risk = n - i;
                s *= 1.0 - d as f64 / at_risk as f64;
                curve.times.push(t);
                curve.survival.push(s);
                curve.at_risk.push(at_risk);
                curve.events.push(d);
            }
            i = j;
        }
        curve
    }

    pub fn n_events(&self) -> usize {
        self.events.iter().sum()
    }

    /// Right-continuous step function; `S(t) = 1` before the first event.
    pub fn survival_at(&self, t: f64) -> f64 {
        match self.times.partition_point(|&x| x <= t) {
            0 => 1.0,
            k => self.survival[k - 1],
        }
    }
}

/// Kaplan-Meier curve of the incident records; callers pass one state.
pub fn kaplan_meier(dwells: &[DwellRecord]) -> SurvivalCurve {
    let samples: Vec<(f64, bool)> =
        dwells.iter().filter(|d| d.is_incident()).map(|d| (d.duration, d.exit_observed)).collect();
    SurvivalCurve::from_samples(&samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_limit() {
        let c = SurvivalCurve::from_samples(&[(1.0, true), (2.0, true), (2.5, false)]);
        assert_eq!(c.times, vec![1.0, 2.0]);
        assert_eq!(c.at_risk, vec![3, 2]);
        assert!((c.survival_at(1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.survival_at(2.0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.survival_at(0.5), 1.0);
        assert_eq!(c.n_censored, 1);
    }

    #[test]
    fn all_censored_is_flat() {
        let c = SurvivalCurve::from_samples(&[(1.0, false), (3.0, false)]);
        assert!(c.times.is_empty());
        assert_eq!(c.survival_at(10.0), 1.0);
    }

    #[test]
    fn censored_at_event_time_stays_at_risk() {
        let c = SurvivalCurve::from_samples(&[(1.0, true), (1.0, false), (2.0, true)]);
        assert_eq!(c.at_risk, vec![3, 1]);
        assert!((c.survival[0] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.survival[1], 0.0);
    }

    #[test]
    fn non_incident_records_ignored() {
        use crate::hmm::LcState;
        let rec = |duration, entry_observed| DwellRecord {
            trajectory: 0,
            start: 0,
            state: LcState::LC1,
            duration,
            entry_observed,
            exit_observed: true,
        };
        let c = kaplan_meier(&[rec(1.0, false), rec(2.0, true)]);
        assert_eq!(c.n_records, 1);
        assert_eq!(c.times, vec![2.0]);
    }
}
