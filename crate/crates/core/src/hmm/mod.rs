//! Two-state Gaussian hidden Markov model used to segment trajectories into
//! visits to the two limit cycles.

mod em;
mod features;
mod gaussian;
mod kmeans;
mod viterbi;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use em::{baum_welch, forward_backward, log_likelihood, EmControls, ForwardBackward, TrainedModel};
pub use features::{features, Observation, ObservationSet, Standardization};
pub use gaussian::{floor_eigenvalues, CovarianceKind, Gaussian2, COVARIANCE_FLOOR};
pub use kmeans::{kmeans, kmeans_init, KmeansResult};
pub use viterbi::viterbi;

/// Separation (in pooled standard deviations) below which the two emission
/// components are considered merged.
pub const MELTED_SEPARATION: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LcState {
    LC1,
    LC2,
}

impl LcState {
    pub fn index(self) -> usize {
        match self {
            Self::LC1 => 0,
            Self::LC2 => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 { Self::LC1 } else { Self::LC2 }
    }

    pub fn other(self) -> Self {
        match self {
            Self::LC1 => Self::LC2,
            Self::LC2 => Self::LC1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmParams {
    pub pi: [f64; 2],
    pub a: [[f64; 2]; 2],
    pub emissions: [Gaussian2; 2],
}

impl HmmParams {
    pub fn validate(&self) -> Result<()> {
        let stochastic = |v: &[f64; 2]| v.iter().all(|p| (0.0..=1.0).contains(p)) && (v[0] + v[1] - 1.0).abs() < 1e-10;
        if !stochastic(&self.pi) || !self.a.iter().all(stochastic) {
            return Err(Error::InvalidParameter("initial or transition probabilities are not stochastic".into()));
        }
        for g in &self.emissions {
            let e = g.eigenvalues();
            if !(e[0] >= COVARIANCE_FLOOR * (1.0 - 1e-9)) || g.cov[0][1] != g.cov[1][0] {
                return Err(Error::InvalidParameter("covariance is not symmetric positive definite".into()));
            }
        }
        Ok(())
    }

    /// Relabels the components so that LC1 has the smaller first mean coordinate.
    pub fn canonicalize(&mut self) -> bool {
        if self.emissions[0].mean[0] <= self.emissions[1].mean[0] {
            return false;
        }
        self.pi.swap(0, 1);
        self.emissions.swap(0, 1);
        self.a = [[self.a[1][1], self.a[1][0]], [self.a[0][1], self.a[0][0]]];
        true
    }

    /// Mahalanobis distance between the means under the pooled covariance.
    pub fn separation(&self) -> f64 {
        let [g1, g2] = &self.emissions;
        let mut pooled = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                pooled[i][j] = 0.5 * (g1.cov[i][j] + g2.cov[i][j]);
            }
        }
        let pooled = Gaussian2::new([0.0; 2], pooled);
        let inv = pooled.inverse_cov();
        let d = [g1.mean[0] - g2.mean[0], g1.mean[1] - g2.mean[1]];
        (d[0] * (inv[0][0] * d[0] + inv[0][1] * d[1]) + d[1] * (inv[1][0] * d[0] + inv[1][1] * d[1]))
            .max(0.0)
            .sqrt()
    }

    pub fn is_melted(&self) -> bool {
        self.separation() < MELTED_SEPARATION
    }
}

/// Decoded labels of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSequence {
    /// Index of the first labelled sample in the trajectory record.
    pub offset: usize,
    pub labels: Vec<LcState>,
    pub log_likelihood: f64,
}

impl StateSequence {
    /// Run-length encoding `(start, length, state)` with absolute starts.
    pub fn runs(&self) -> Vec<(usize, usize, LcState)> {
        let mut out: Vec<(usize, usize, LcState)> = Vec::new();
        for (k, &s) in self.labels.iter().enumerate() {
            match out.last_mut() {
                Some(run) if run.2 == s => run.1 += 1,
                _ => out.push((self.offset + k, 1, s)),
            }
        }
        out
    }

    pub fn from_runs(offset: usize, runs: &[(usize, usize, LcState)]) -> Result<Self> {
        let mut labels = Vec::new();
        for &(start, len, s) in runs {
            if start != offset + labels.len() {
                return Err(Error::Format("label runs are not contiguous".into()));
            }
            labels.extend(std::iter::repeat_n(s, len));
        }
        Ok(Self { offset, labels, log_likelihood: f64::NAN })
    }
}

/// End-to-end segmentation result of an ensemble.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Segmentation {
    pub standardization: Standardization,
    pub initial: HmmParams,
    pub model: TrainedModel,
    pub sequences: Vec<StateSequence>,
    pub separation: f64,
    pub melted: bool,
}

/// Feature extraction, k-means initialization, joint Baum-Welch training and
/// Viterbi decoding of every record.
pub fn segment(
    records: &[crate::qjump::TrajectoryRecord],
    controls: &EmControls,
    seed: u64,
) -> Result<Segmentation> {
    use rayon::prelude::*;
    let obs = features(records)?;
    let seqs = obs.standardized();
    let initial = kmeans_init(&seqs, controls.covariance, seed)?;
    let model = baum_welch(&initial, &seqs, controls)?;
    let sequences = seqs
        .par_iter()
        .zip(&obs.offsets)
        .map(|(s, &off)| {
            let mut v = viterbi(&model.params, s);
            v.offset = off;
            v
        })
        .collect();
    let separation = model.params.separation();
    Ok(Segmentation {
        standardization: obs.standardization,
        initial,
        melted: separation < MELTED_SEPARATION,
        separation,
        model,
        sequences,
    })
}
