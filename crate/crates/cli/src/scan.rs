//! Mean-field attractor scans over `(delta_a, F)` and limit-cycle tables.

use std::path::{Path, PathBuf};

use lcswitch_core::meanfield::{
    classify_point, default_initial_grid, extract_limit_cycles, ClassifyControls, LimitCycleOrbit, PhaseCell,
};
use lcswitch_core::model::SystemParams;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::artifacts::{num, write_csv, write_json};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub delta_a: (f64, f64),
    pub force: (f64, f64),
    pub n_delta: usize,
    pub n_force: usize,
}

impl ScanGrid {
    /// `n x n` cells spaced by `(d_delta, d_force)` around the point of `p`.
    pub fn centered(p: &SystemParams, n: usize, d_delta: f64, d_force: f64) -> Self {
        let half = (n.saturating_sub(1)) as f64 / 2.0;
        Self {
            delta_a: (p.delta_a - half * d_delta, p.delta_a + half * d_delta),
            force: (p.force - half * d_force, p.force + half * d_force),
            n_delta: n,
            n_force: n,
        }
    }

    fn axis(range: (f64, f64), n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![0.5 * (range.0 + range.1)];
        }
        (0..n).map(|i| range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64).collect()
    }

    pub fn delta_axis(&self) -> Vec<f64> {
        Self::axis(self.delta_a, self.n_delta)
    }

    pub fn force_axis(&self) -> Vec<f64> {
        Self::axis(self.force, self.n_force)
    }
}

/// Cells in row-major order, force outermost.
pub fn scan(
    base: &SystemParams,
    grid: &ScanGrid,
    starts: &[Complex64],
    controls: &ClassifyControls,
) -> CliResult<Vec<PhaseCell>> {
    if grid.n_delta == 0 || grid.n_force == 0 {
        return Err(CliError::Config("scan grid must have at least one cell per axis".into()));
    }
    let mut cells = Vec::with_capacity(grid.n_delta * grid.n_force);
    for f in grid.force_axis() {
        for d in grid.delta_axis() {
            log::info!("classifying delta_a = {d}, F = {f}");
            cells.push(classify_point(d, f, base, starts, controls).map_err(|e| CliError::stage("meanfield-scan", e))?);
        }
    }
    Ok(cells)
}

/// Attractors tabulated per cell; further ones only enter `n_attractors`.
const ATTRACTOR_COLUMNS: usize = 3;

pub fn write_scan(dir: &Path, grid: &ScanGrid, cells: &[PhaseCell]) -> CliResult<Vec<PathBuf>> {
    let mut header: Vec<String> =
        ["delta_a", "F_tilde", "label", "n_attractors", "excluded", "unconverged"].map(String::from).to_vec();
    for i in 1..=ATTRACTOR_COLUMNS {
        for q in ["d_alpha_r", "d_beta_r", "mean_na", "mean_nb"] {
            header.push(format!("a{i}_{q}"));
        }
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        &dir.join("meanfield_scan.csv"),
        &header,
        cells.iter().map(|c| {
            let mut row = vec![
                num(c.delta_a),
                num(c.f_tilde),
                c.label.as_str().to_string(),
                c.attractors.len().to_string(),
                c.excluded.len().to_string(),
                c.unconverged.len().to_string(),
            ];
            for i in 0..ATTRACTOR_COLUMNS {
                match c.attractors.get(i) {
                    Some(a) => row.extend(a.as_array().map(num)),
                    None => row.extend(std::iter::repeat_n(String::new(), 4)),
                }
            }
            row
        }),
    )?;
    write_json(&dir.join("meanfield_scan.json"), &(grid, cells))?;
    Ok(vec!["meanfield_scan.csv".into(), "meanfield_scan.json".into()])
}

pub fn limit_cycles(p: &SystemParams, controls: &ClassifyControls) -> CliResult<Vec<LimitCycleOrbit>> {
    extract_limit_cycles(p, &default_initial_grid(), controls).map_err(|e| CliError::stage("meanfield-scan", e))
}

/// One row per orbit sample, orbits numbered from 1 in order of mean `n_a`.
pub fn write_limit_cycles(dir: &Path, orbits: &[LimitCycleOrbit]) -> CliResult<Vec<PathBuf>> {
    write_csv(
        &dir.join("limit_cycles.csv"),
        &["cycle", "t", "re_alpha", "im_alpha", "re_beta", "im_beta", "n_a", "n_b"],
        orbits.iter().enumerate().flat_map(|(i, o)| {
            o.times.iter().zip(&o.samples).map(move |(t, s)| {
                vec![
                    (i + 1).to_string(),
                    num(*t),
                    num(s.alpha.re),
                    num(s.alpha.im),
                    num(s.beta.re),
                    num(s.beta.im),
                    num(s.n_a()),
                    num(s.n_b()),
                ]
            })
        }),
    )?;
    Ok(vec!["limit_cycles.csv".into()])
}
