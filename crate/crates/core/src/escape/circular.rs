use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

/// Maps any angle to `[0, 2 pi)`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w >= TAU { 0.0 } else { w }
}

/// Bin index of an angle on a grid of `n` equal bins over `[0, 2 pi)`.
pub fn phase_bin(phi: f64, n: usize) -> usize {
    ((wrap_phase(phi) / TAU * n as f64) as usize).min(n - 1)
}

pub fn bin_center(k: usize, n: usize) -> f64 {
    (k as f64 + 0.5) * TAU / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircularStats {
    pub mean_direction: f64,
    /// Mean resultant length.
    pub resultant: f64,
    /// `1 - resultant`
    pub variance: f64,
    /// `sqrt(-2 ln resultant)`; infinite for a balanced sample.
    pub std: f64,
    pub weight: f64,
}

impl CircularStats {
    pub fn from_weighted(samples: impl IntoIterator<Item = (f64, f64)>) -> Option<Self> {
        let (mut c, mut s, mut w) = (0.0, 0.0, 0.0);
        for (phi, wt) in samples {
            c += wt * phi.cos();
            s += wt * phi.sin();
            w += wt;
        }
        if !(w > 0.0) {
            return None;
        }
        let resultant = (c.hypot(s) / w).min(1.0);
        Some(Self {
            mean_direction: wrap_phase(s.atan2(c)),
            resultant,
            variance: 1.0 - resultant,
            std: (-2.0 * resultant.ln()).sqrt(),
            weight: w,
        })
    }

    pub fn from_angles(angles: &[f64]) -> Option<Self> {
        Self::from_weighted(angles.iter().map(|&a| (a, 1.0)))
    }

    /// Statistics of a density sampled at bin centers.
    pub fn from_density(density: &[f64]) -> Option<Self> {
        let n = density.len();
        Self::from_weighted(density.iter().enumerate().map(|(k, &p)| (bin_center(k, n), p)))
    }

    /// Rayleigh test p-value of uniformity, `exp(-n R^2)` to leading order.
    pub fn rayleigh_p(&self) -> f64 {
        (-self.weight * self.resultant * self.resultant).exp()
    }
}

/// Circular standard deviation at the Rayleigh critical resultant of `n`
/// uniform samples at level `alpha`; smaller values reject uniformity.
pub fn uniform_reference_std(n: usize, alpha: f64) -> f64 {
    let r_crit = ((1.0 / alpha).ln() / n as f64).sqrt().min(1.0);
    // `+ 0.0` turns the -0.0 at r_crit = 1 into 0.0
    (-2.0 * r_crit.ln()).sqrt() + 0.0
}
