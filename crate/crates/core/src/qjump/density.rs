use serde::{Deserialize, Serialize};

use super::trajectory::TrajectoryRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    /// `(Re α̃, Im α̃)`
    Optical,
    /// `(Re β̃, Im β̃)`
    Mechanical,
    /// `(ñ_a, ñ_b)`
    Populations,
}

impl Projection {
    pub fn point(self, r: &TrajectoryRecord, k: usize) -> (f64, f64) {
        match self {
            Self::Optical => (r.alpha[k].re, r.alpha[k].im),
            Self::Mechanical => (r.beta[k].re, r.beta[k].im),
            Self::Populations => (r.n_a[k], r.n_b[k]),
        }
    }
}

/// Binning of a 2-D histogram; `range = None` spans the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub nx: usize,
    pub ny: usize,
    pub range: Option<[f64; 4]>,
}

impl Default for BinSpec {
    fn default() -> Self {
        Self { nx: 100, ny: 100, range: None }
    }
}

/// Probability mass per bin; `mass[ix * ny + iy]` sums to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram2D {
    pub projection: Projection,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub nx: usize,
    pub ny: usize,
    pub mass: Vec<f64>,
    pub samples: usize,
    /// Samples that fell outside an explicit range.
    pub dropped: usize,
}

impl Histogram2D {
    pub fn bin_area(&self) -> f64 {
        (self.x_range.1 - self.x_range.0) / self.nx as f64 * (self.y_range.1 - self.y_range.0) / self.ny as f64
    }

    pub fn density(&self, ix: usize, iy: usize) -> f64 {
        self.mass[ix * self.ny + iy] / self.bin_area()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn occupied_bins(&self) -> usize {
        self.mass.iter().filter(|&&m| m > 0.0).count()
    }
}

/// One-dimensional histogram with probability mass per bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram1D {
    pub range: (f64, f64),
    pub mass: Vec<f64>,
}

/// Smallest peak height, relative to the highest, that counts as a mode.
pub const MIN_PEAK_FRACTION: f64 = 0.05;

/// Two separated peaks of a smoothed histogram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bimodality {
    pub left_peak: f64,
    pub right_peak: f64,
    /// Smoothed mass at the deepest point between the peaks over the lower peak.
    pub dip_ratio: f64,
}

impl Histogram1D {
    pub fn bin_center(&self, k: usize) -> f64 {
        let w = (self.range.1 - self.range.0) / self.mass.len() as f64;
        self.range.0 + (k as f64 + 0.5) * w
    }

    /// Moving average over `2 * half + 1` bins.
    pub fn smoothed(&self, half: usize) -> Vec<f64> {
        let n = self.mass.len();
        (0..n)
            .map(|k| {
                let lo = k.saturating_sub(half);
                let hi = (k + half).min(n - 1);
                self.mass[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
            })
            .collect()
    }

    /// The two most prominent maxima of the smoothed histogram and the dip
    /// between them. Maxima below `MIN_PEAK_FRACTION` of the highest one are
    /// ignored.
    pub fn bimodality(&self, smoothing: usize) -> Option<Bimodality> {
        let s = self.smoothed(smoothing);
        let n = s.len();
        let floor = MIN_PEAK_FRACTION * s.iter().cloned().fold(0.0, f64::max);
        let mut best: Option<(usize, usize, f64)> = None;
        // every pair (i < j) of local maxima; score by the dip relative to the lower peak
        let peaks: Vec<usize> = (0..n)
            .filter(|&k| {
                let left = if k == 0 { f64::NEG_INFINITY } else { s[k - 1] };
                let right = if k + 1 == n { f64::NEG_INFINITY } else { s[k + 1] };
                s[k] > 0.0 && s[k] >= floor && s[k] >= left && s[k] > right
            })
            .collect();
        for (a, &i) in peaks.iter().enumerate() {
            for &j in &peaks[a + 1..] {
                let dip = s[i..=j].iter().cloned().fold(f64::INFINITY, f64::min);
                let ratio = dip / s[i].min(s[j]);
                if best.is_none_or(|b| ratio < b.2) {
                    best = Some((i, j, ratio));
                }
            }
        }
        best.map(|(i, j, dip_ratio)| Bimodality {
            left_peak: self.bin_center(i),
            right_peak: self.bin_center(j),
            dip_ratio,
        })
    }
}

fn check_compatible(records: &[TrajectoryRecord]) -> Result<()> {
    let first = records.first().ok_or(Error::EmptyInput("trajectory records"))?;
    for r in records {
        if r.aleph != first.aleph || r.dt_sample != first.dt_sample {
            return Err(Error::InvalidParameter("records differ in aleph or sampling grid".into()));
        }
    }
    Ok(())
}

fn post_points(records: &[TrajectoryRecord], projection: Projection) -> impl Iterator<Item = (f64, f64)> + '_ {
    records.iter().flat_map(move |r| r.post_transient_range().map(move |k| projection.point(r, k)))
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

fn bin(v: f64, (lo, hi): (f64, f64), n: usize) -> Option<usize> {
    if !(v >= lo && v <= hi) {
        return None;
    }
    Some((((v - lo) / (hi - lo)) * n as f64).floor().min((n - 1) as f64) as usize)
}

impl Histogram2D {
    /// Histogram of arbitrary points; `range = None` spans the points.
    pub fn from_points(points: &[(f64, f64)], projection: Projection, bins: BinSpec) -> Result<Self> {
        if bins.nx == 0 || bins.ny == 0 {
            return Err(Error::InvalidParameter("histogram needs at least one bin per axis".into()));
        }
        let (xr, yr) = match bins.range {
            Some([x0, x1, y0, y1]) if x1 > x0 && y1 > y0 => ((x0, x1), (y0, y1)),
            Some(_) => return Err(Error::InvalidParameter("empty histogram range".into())),
            None => (span(points.iter().map(|p| p.0)), span(points.iter().map(|p| p.1))),
        };
        let mut counts = vec![0u64; bins.nx * bins.ny];
        let mut dropped = 0;
        let mut total = 0;
        for &(x, y) in points {
            match (bin(x, xr, bins.nx), bin(y, yr, bins.ny)) {
                (Some(i), Some(j)) => {
                    counts[i * bins.ny + j] += 1;
                    total += 1;
                }
                _ => dropped += 1,
            }
        }
        if total == 0 {
            return Err(Error::EmptyInput("samples inside the histogram range"));
        }
        Ok(Histogram2D {
            projection,
            x_range: xr,
            y_range: yr,
            nx: bins.nx,
            ny: bins.ny,
            mass: counts.iter().map(|&c| c as f64 / total as f64).collect(),
            samples: total,
            dropped,
        })
    }
}

/// Normalized 2-D histogram of all post-transient samples.
pub fn stationary_density(records: &[TrajectoryRecord], projection: Projection, bins: BinSpec) -> Result<Histogram2D> {
    check_compatible(records)?;
    let points: Vec<(f64, f64)> = post_points(records, projection).collect();
    if points.is_empty() {
        return Err(Error::EmptyInput("post-transient samples"));
    }
    Histogram2D::from_points(&points, projection, bins)
}

/// Post-transient histogram of `ñ_a`.
pub fn population_marginal(records: &[TrajectoryRecord], bins: usize, range: Option<(f64, f64)>) -> Result<Histogram1D> {
    check_compatible(records)?;
    if bins == 0 {
        return Err(Error::InvalidParameter("histogram needs at least one bin".into()));
    }
    let values = || records.iter().flat_map(|r| r.post_transient_range().map(move |k| r.n_a[k]));
    let range = range.unwrap_or_else(|| span(values()));
    let mut counts = vec![0u64; bins];
    let mut total = 0u64;
    for v in values() {
        if let Some(k) = bin(v, range, bins) {
            counts[k] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::EmptyInput("post-transient samples"));
    }
    Ok(Histogram1D {
        range,
        mass: counts.iter().map(|&c| c as f64 / total as f64).collect(),
    })
}
