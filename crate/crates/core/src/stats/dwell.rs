use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmm::{LcState, StateSequence};

/// One maximal run of a constant label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwellRecord {
    pub trajectory: usize,
    /// Sample index of the first sample of the run in the trajectory record.
    pub start: usize,
    pub state: LcState,
    pub duration: f64,
    pub entry_observed: bool,
    /// `false` means right-censored.
    pub exit_observed: bool,
}

impl DwellRecord {
    pub fn is_incident(&self) -> bool {
        self.entry_observed
    }

    pub fn is_censored(&self) -> bool {
        !self.exit_observed
    }
}

/// Splits every decoded sequence into runs; `dt` is the sampling interval.
pub fn extract_dwells(sequences: &[StateSequence], dt: f64) -> Result<Vec<DwellRecord>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("sampling interval must be positive, got {dt}")));
    }
    if sequences.is_empty() {
        return Err(Error::EmptyInput("state sequences"));
    }
    let mut out = Vec::new();
    for (trajectory, seq) in sequences.iter().enumerate() {
        if seq.labels.is_empty() {
            return Err(Error::EmptyInput("state sequence"));
        }
        let runs = seq.runs();
        let last = runs.len() - 1;
        out.extend(runs.into_iter().enumerate().map(|(r, (start, len, state))| DwellRecord {
            trajectory,
            start,
            state,
            duration: len as f64 * dt,
            entry_observed: r > 0,
            exit_observed: r < last,
        }));
    }
    Ok(out)
}

/// Incident records of one state.
pub fn incident(dwells: &[DwellRecord], state: LcState) -> Vec<DwellRecord> {
    dwells.iter().filter(|d| d.is_incident() && d.state == state).copied().collect()
}
