use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qjump::TrajectoryRecord;

/// `(sqrt(ñ_a), sqrt(ñ_b))` and its globally standardized copy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub raw: [f64; 2],
    pub standardized: [f64; 2],
}

/// Ensemble-wide mean and standard deviation of each feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: [f64; 2],
    pub std: [f64; 2],
}

impl Standardization {
    pub fn fit<'a>(points: impl Iterator<Item = &'a [f64; 2]> + Clone) -> Result<Self> {
        let n = points.clone().count();
        if n == 0 {
            return Err(Error::EmptyInput("observations"));
        }
        let mut mean = [0.0; 2];
        for p in points.clone() {
            mean[0] += p[0];
            mean[1] += p[1];
        }
        mean = [mean[0] / n as f64, mean[1] / n as f64];
        let mut var = [0.0; 2];
        for p in points {
            var[0] += (p[0] - mean[0]).powi(2);
            var[1] += (p[1] - mean[1]).powi(2);
        }
        let std = var.map(|v| {
            let s = (v / n as f64).sqrt();
            if s > 0.0 { s } else { 1.0 }
        });
        Ok(Self { mean, std })
    }

    pub fn apply(&self, x: &[f64; 2]) -> [f64; 2] {
        [(x[0] - self.mean[0]) / self.std[0], (x[1] - self.mean[1]) / self.std[1]]
    }

    pub fn invert(&self, z: &[f64; 2]) -> [f64; 2] {
        [z[0] * self.std[0] + self.mean[0], z[1] * self.std[1] + self.mean[1]]
    }
}

/// Post-transient observations of every record of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub sequences: Vec<Vec<Observation>>,
    /// Record index of the first observation of each sequence.
    pub offsets: Vec<usize>,
    pub standardization: Standardization,
}

impl ObservationSet {
    pub fn standardized(&self) -> Vec<Vec<[f64; 2]>> {
        self.sequences.iter().map(|s| s.iter().map(|o| o.standardized).collect()).collect()
    }
}

pub fn features(records: &[TrajectoryRecord]) -> Result<ObservationSet> {
    if records.is_empty() {
        return Err(Error::EmptyInput("trajectory records"));
    }
    let raw: Vec<Vec<[f64; 2]>> = records
        .iter()
        .map(|r| r.post_transient_range().map(|k| [r.n_a[k].max(0.0).sqrt(), r.n_b[k].max(0.0).sqrt()]).collect())
        .collect();
    if raw.iter().any(|s| s.is_empty()) {
        return Err(Error::EmptyInput("post-transient samples"));
    }
    if raw.iter().flatten().any(|x| !x[0].is_finite() || !x[1].is_finite()) {
        return Err(Error::InvalidParameter("non-finite observation".into()));
    }
    let standardization = Standardization::fit(raw.iter().flatten())?;
    Ok(ObservationSet {
        sequences: raw
            .iter()
            .map(|s| s.iter().map(|x| Observation { raw: *x, standardized: standardization.apply(x) }).collect())
            .collect(),
        offsets: records.iter().map(|r| r.post_transient_range().start).collect(),
        standardization,
    })
}
