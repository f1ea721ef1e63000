//! Summary of a completed (or partial) run and plot-ready tables.

use std::path::{Path, PathBuf};

use lcswitch_core::stats::Direction;
use serde::{Deserialize, Serialize};

use crate::artifacts::{num, opt, read_json, write_csv, write_json, FileEntry};
use crate::config::{aleph_dir, RunConfig};
use crate::error::CliResult;
use crate::manifest::{RunManifest, StageStatus};
use crate::pipeline::{expected_stages, Stage, CONFIG_SNAPSHOT};
use crate::stages::{self, DirectionEscape, EscapeSummary, FitStatus, RatesFile, ScalingEntry, SegmentationSummary};

pub const REPORT_DIR: &str = "report";
pub const SUMMARY_FILE: &str = "report/summary.json";
pub const RATES_TABLE: &str = "report/rates_table.csv";
pub const SCALING_CURVES: &str = "report/scaling_curves.csv";

const CURVE_POINTS: usize = 101;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub aleph: f64,
    pub k12: Option<f64>,
    pub k12_ci: Option<[f64; 2]>,
    pub k21: Option<f64>,
    pub k21_ci: Option<[f64; 2]>,
    /// `k12 + k21`.
    pub lambda_eff: Option<f64>,
    pub status_12: FitStatus,
    pub status_21: FitStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlephSummary {
    pub aleph: f64,
    pub truncation_warning: Option<bool>,
    pub segmentation: Option<SegmentationBrief>,
    pub rates: Option<RateRow>,
    pub escape: Vec<DirectionEscape>,
    /// Plot-ready files of this aleph, relative to the output root.
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationBrief {
    pub separation: f64,
    pub melted: bool,
    pub occupation: [f64; 2],
    pub log_likelihood: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub tool_version: String,
    pub config_hash: String,
    pub manifest_hash: String,
    pub complete: bool,
    /// Expected stages that are missing or failed.
    pub gaps: Vec<String>,
    pub alephs: Vec<AlephSummary>,
    pub scaling: Vec<ScalingEntry>,
}

/// Table row of one aleph; `lambda_eff` is the plain sum of the two rates.
pub fn rate_row(r: &RatesFile) -> RateRow {
    let status = |d: Direction| r.directions.iter().find(|x| x.direction == d).map(|x| x.status).unwrap_or(FitStatus::Refused);
    let k12 = r.rate(Direction::D12);
    let k21 = r.rate(Direction::D21);
    RateRow {
        aleph: r.aleph,
        k12: k12.map(|f| f.k),
        k12_ci: k12.map(|f| [f.ci_low, f.ci_high]),
        k21: k21.map(|f| f.k),
        k21_ci: k21.map(|f| [f.ci_low, f.ci_high]),
        lambda_eff: k12.zip(k21).map(|(a, b)| a.k + b.k),
        status_12: status(Direction::D12),
        status_21: status(Direction::D21),
    }
}

fn done(manifest: &RunManifest, name: &str) -> bool {
    manifest.stage(name).is_some_and(|s| s.status == StageStatus::Done)
}

fn plot_files(manifest: &RunManifest, aleph: f64) -> Vec<PathBuf> {
    let prefix = PathBuf::from(aleph_dir(aleph));
    let wanted = |p: &Path| {
        let s = p.to_string_lossy();
        p.starts_with(&prefix) && s.ends_with(".csv") && !s.contains("/trajectories/")
    };
    let mut files: Vec<PathBuf> = manifest.files().map(|f: &FileEntry| f.path.clone()).filter(|p| wanted(p)).collect();
    files.sort();
    files
}

/// Writes the summary and the tables under `root/report`. Missing or failed
/// stages are listed as gaps instead of failing the report.
pub fn report(root: &Path, manifest: &RunManifest) -> CliResult<ReportSummary> {
    let config: Option<RunConfig> = std::fs::read_to_string(root.join(CONFIG_SNAPSHOT))
        .ok()
        .and_then(|t| RunConfig::from_toml(&t).ok());
    let expected = match &config {
        Some(c) => expected_stages(c),
        None => manifest.stages.iter().map(|s| s.name.clone()).collect(),
    };
    let gaps: Vec<String> = expected.iter().filter(|n| !done(manifest, n)).cloned().collect();
    let mut alephs: Vec<f64> = match &config {
        Some(c) => c.alephs.clone(),
        None => Vec::new(),
    };
    if alephs.is_empty() {
        for s in &manifest.stages {
            if let Some(a) = s.name.strip_prefix("aleph_").and_then(|r| r.split('/').next()).and_then(|a| a.parse().ok()) {
                if !alephs.contains(&a) {
                    alephs.push(a);
                }
            }
        }
    }

    let mut summaries = Vec::new();
    for &aleph in &alephs {
        let dir = root.join(aleph_dir(aleph));
        let stage_done = |s: Stage| done(manifest, &s.record_name(Some(aleph)));
        let truncation_warning = if stage_done(Stage::Simulate) {
            Some(read_json::<stages::EnsembleIndex>(&dir.join(stages::ENSEMBLE_FILE))?.any_truncation_warning())
        } else {
            None
        };
        let segmentation = if stage_done(Stage::Segment) {
            let s: SegmentationSummary = read_json(&dir.join(stages::SEGMENTATION_FILE))?;
            Some(SegmentationBrief {
                separation: s.separation,
                melted: s.melted,
                occupation: s.occupation,
                log_likelihood: s.model.log_likelihood(),
                converged: s.model.converged,
            })
        } else {
            None
        };
        let rates = if stage_done(Stage::FitRates) {
            Some(rate_row(&read_json::<RatesFile>(&dir.join(stages::RATES_FILE))?))
        } else {
            None
        };
        let escape = if stage_done(Stage::EscapeGeometry) {
            read_json::<EscapeSummary>(&dir.join(stages::ESCAPE_FILE))?.directions
        } else {
            Vec::new()
        };
        summaries.push(AlephSummary { aleph, truncation_warning, segmentation, rates, escape, files: plot_files(manifest, aleph) });
    }

    let scaling: Vec<ScalingEntry> =
        if done(manifest, Stage::Scaling.as_str()) { read_json(&root.join(stages::SCALING_FILE))? } else { Vec::new() };

    let ci = |c: Option<[f64; 2]>, i: usize| opt(c.map(|c| c[i]));
    write_csv(
        &root.join(RATES_TABLE),
        &["aleph", "k12", "k12_ci_low", "k12_ci_high", "k21", "k21_ci_low", "k21_ci_high", "lambda_eff"],
        summaries.iter().filter_map(|s| s.rates.as_ref()).map(|r| {
            vec![
                num(r.aleph),
                opt(r.k12),
                ci(r.k12_ci, 0),
                ci(r.k12_ci, 1),
                opt(r.k21),
                ci(r.k21_ci, 0),
                ci(r.k21_ci, 1),
                opt(r.lambda_eff),
            ]
        }),
    )?;

    write_csv(&root.join(SCALING_CURVES), &stages::SCALING_CURVE_HEADER, stages::scaling_curve_rows(&scaling, CURVE_POINTS))?;

    let summary = ReportSummary {
        tool_version: manifest.tool_version.clone(),
        config_hash: manifest.config_hash.clone(),
        manifest_hash: manifest.manifest_hash.clone(),
        complete: gaps.is_empty(),
        gaps,
        alephs: summaries,
        scaling,
    };
    write_json(&root.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}
