use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmm::StateSequence;
use crate::stats::Direction;

/// Minimum dwells before and after a label flip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventFilters {
    pub pre_min: f64,
    pub post_min: f64,
}

impl EventFilters {
    /// Defaults for conditioned phase-space densities, `(15, 10) / kappa_a`.
    pub fn densities(kappa_a: f64) -> Self {
        Self { pre_min: 15.0 / kappa_a, post_min: 10.0 / kappa_a }
    }

    /// Defaults for exit-phase histograms, `(15, 2) / kappa_a`.
    pub fn phase_histograms(kappa_a: f64) -> Self {
        Self { pre_min: 15.0 / kappa_a, post_min: 2.0 / kappa_a }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    pub trajectory: usize,
    /// Record index of the last sample labelled with the departure state.
    pub switch_index: usize,
    /// Time of that sample; lag `tau = 0`.
    pub t_switch: f64,
    /// Midpoint between the last departure and first arrival sample.
    pub t_cross: f64,
    pub direction: Direction,
    pub pre_dwell: f64,
    pub post_dwell: f64,
}

/// Label flips whose neighbouring runs satisfy the dwell filters.
pub fn find_events(sequences: &[StateSequence], dt: f64, filters: &EventFilters) -> Result<Vec<SwitchEvent>> {
    if !(dt > 0.0) || !(filters.pre_min >= 0.0 && filters.post_min >= 0.0) {
        return Err(Error::InvalidParameter("sampling interval and dwell filters must be positive".into()));
    }
    let mut out = Vec::new();
    for (trajectory, seq) in sequences.iter().enumerate() {
        let runs = seq.runs();
        for w in runs.windows(2) {
            let ((start, len, from), (_, next_len, _)) = (w[0], w[1]);
            let (pre_dwell, post_dwell) = (len as f64 * dt, next_len as f64 * dt);
            if pre_dwell >= filters.pre_min && post_dwell >= filters.post_min {
                let switch_index = start + len - 1;
                let t_switch = switch_index as f64 * dt;
                out.push(SwitchEvent {
                    trajectory,
                    switch_index,
                    t_switch,
                    t_cross: t_switch + 0.5 * dt,
                    direction: Direction::leaving(from),
                    pre_dwell,
                    post_dwell,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hmm::LcState::{self, *};

    fn seq(pattern: &[(LcState, usize)]) -> StateSequence {
        let labels = pattern.iter().flat_map(|&(s, n)| std::iter::repeat_n(s, n)).collect();
        StateSequence { offset: 3, labels, log_likelihood: 0.0 }
    }

    const KAPPA: f64 = 0.1;
    const DT: f64 = 1.0;

    #[test]
    fn flicker_rejected_on_both_sides() {
        // dwells (20, 1, 20) / kappa at dt = 0.1 / kappa
        let s = seq(&[(LC1, 200), (LC2, 10), (LC1, 200)]);
        assert!(find_events(&[s], DT, &EventFilters::densities(KAPPA)).unwrap().is_empty());
    }

    #[test]
    fn single_event() {
        let s = seq(&[(LC1, 200), (LC2, 120)]);
        let e = find_events(&[s], DT, &EventFilters::densities(KAPPA)).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].direction, Direction::D12);
        assert_eq!(e[0].switch_index, 3 + 199);
        assert_eq!((e[0].pre_dwell, e[0].post_dwell), (200.0, 120.0));
        assert_eq!(e[0].t_cross - e[0].t_switch, 0.5);
    }

    #[test]
    fn tighter_filters_give_subset() {
        let s = seq(&[(LC1, 200), (LC2, 50), (LC1, 170), (LC2, 30), (LC1, 400), (LC2, 110)]);
        let loose = find_events(std::slice::from_ref(&s), DT, &EventFilters::phase_histograms(KAPPA)).unwrap();
        let tight = find_events(&[s], DT, &EventFilters::densities(KAPPA)).unwrap();
        assert!(tight.iter().all(|e| loose.contains(e)));
        assert!(tight.len() < loose.len());
    }
}
