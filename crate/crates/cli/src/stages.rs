//! The analysis stages. Each reads its inputs from, and writes its outputs
//! to, one directory and returns the written paths relative to it.

use std::path::{Path, PathBuf};

use lcswitch_core::escape::{
    self, bin_center, conditioned_density, exit_phases, find_events, phase_histogram, stationary_phase_distribution,
    uniform_reference_std, CircularStats, EventFilters, PhaseGrid, SwitchEvent,
};
use lcswitch_core::hmm::{self, LcState, Segmentation, StateSequence, Standardization, TrainedModel, HmmParams};
use lcswitch_core::model::{resolve_params, FockCutoffs, ScalingPlan, Scheme, SystemParams};
use lcswitch_core::qjump::{
    population_marginal, stationary_density, storage, trajectory_seed, BinSpec, EnsembleSetup, EnsembleSpec,
    Histogram2D, Projection, TrajectoryRecord, TruncationWarnings,
};
use lcswitch_core::stats::{
    effective_relaxation, extract_dwells, fit_conditional_rate, fit_scaling, kaplan_meier, select_t0,
    stationary_occupations, Direction, DwellRecord, RateControls, RateFit, ScalingFit, ScalingForm, ScalingPoint,
    ThresholdCandidate,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::{num, opt, read_json, write_bytes, write_csv, write_json, write_matrix_csv};
use crate::config::AnalysisOptions;
use crate::error::{CliError, CliResult};

pub const ENSEMBLE_FILE: &str = "ensemble.json";
pub const SEGMENTATION_FILE: &str = "segmentation.json";
pub const LABELS_FILE: &str = "labels.json";
pub const DWELLS_FILE: &str = "dwells.csv";
pub const RATES_FILE: &str = "rates.json";
pub const ESCAPE_FILE: &str = "escape/escape.json";
pub const SCALING_FILE: &str = "scaling.json";

const DIRECTIONS: [Direction; 2] = [Direction::D12, Direction::D21];

fn core_err(stage: &str) -> impl Fn(lcswitch_core::Error) -> CliError + '_ {
    move |e| CliError::stage(stage, e)
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEntry {
    pub file: String,
    pub seed: u64,
    pub samples: usize,
    pub jumps: usize,
    pub warnings: TruncationWarnings,
}

/// Human-readable index of an ensemble directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleIndex {
    pub aleph: f64,
    pub scheme: Scheme,
    pub base: SystemParams,
    pub simulated: SystemParams,
    pub time_factor: f64,
    pub spec: EnsembleSpec,
    pub cutoffs: FockCutoffs,
    pub seed: u64,
    pub propagation_dt: f64,
    pub trajectories: Vec<TrajectoryEntry>,
}

impl EnsembleIndex {
    pub fn any_truncation_warning(&self) -> bool {
        self.trajectories.iter().any(|t| t.warnings.any())
    }
}

fn trajectory_csv(r: &TrajectoryRecord) -> Vec<Vec<String>> {
    (0..r.len())
        .map(|k| {
            vec![
                num(r.times[k]),
                num(r.n_a[k]),
                num(r.n_b[k]),
                num(r.alpha[k].re),
                num(r.alpha[k].im),
                num(r.beta[k].re),
                num(r.beta[k].im),
            ]
        })
        .collect()
}

fn histogram_csv(path: &Path, h: &Histogram2D, corner: &str) -> CliResult<()> {
    let wx = (h.x_range.1 - h.x_range.0) / h.nx as f64;
    let wy = (h.y_range.1 - h.y_range.0) / h.ny as f64;
    let xs: Vec<f64> = (0..h.nx).map(|i| h.x_range.0 + (i as f64 + 0.5) * wx).collect();
    let ys: Vec<f64> = (0..h.ny).map(|j| h.y_range.0 + (j as f64 + 0.5) * wy).collect();
    let rows: Vec<Vec<String>> = (0..h.ny).map(|j| (0..h.nx).map(|i| num(h.density(i, j))).collect()).collect();
    write_matrix_csv(path, corner, &xs, &ys, &rows)
}

/// Runs the ensemble and writes one binary and one CSV file per trajectory,
/// the ensemble index and the stationary densities.
pub fn simulate(
    dir: &Path,
    plan: &ScalingPlan,
    spec: &EnsembleSpec,
    cutoffs: FockCutoffs,
    seed: u64,
    opts: &AnalysisOptions,
) -> CliResult<Vec<PathBuf>> {
    const STAGE: &str = "simulate";
    let setup = EnsembleSetup::new(*spec, *plan, cutoffs).map_err(core_err(STAGE))?;
    let resolved = resolve_params(plan).map_err(core_err(STAGE))?;
    let records: Vec<TrajectoryRecord> = (0..spec.n_traj as u64)
        .into_par_iter()
        .map(|i| setup.run(trajectory_seed(seed, i)))
        .collect::<Result<_, _>>()
        .map_err(core_err(STAGE))?;

    let mut out = Vec::new();
    let mut entries = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let bin = format!("trajectories/traj_{i:05}.bin");
        let csv = format!("trajectories/traj_{i:05}.csv");
        write_bytes(&dir.join(&bin), &storage::encode_record(r))?;
        write_csv(&dir.join(&csv), &["t", "n_a", "n_b", "re_alpha", "im_alpha", "re_beta", "im_beta"], trajectory_csv(r))?;
        if r.warnings.any() {
            log::warn!("trajectory {i} approached the Fock cutoff ({:?})", r.warnings);
        }
        entries.push(TrajectoryEntry { file: bin.clone(), seed: r.seed, samples: r.len(), jumps: r.jumps.len(), warnings: r.warnings });
        out.push(bin.into());
        out.push(csv.into());
    }
    let index = EnsembleIndex {
        aleph: plan.aleph,
        scheme: plan.scheme,
        base: plan.base,
        simulated: resolved.params,
        time_factor: resolved.time_factor,
        spec: *spec,
        cutoffs,
        seed,
        propagation_dt: setup.dt,
        trajectories: entries,
    };
    write_json(&dir.join(ENSEMBLE_FILE), &index)?;
    out.push(ENSEMBLE_FILE.into());

    let marginal = population_marginal(&records, opts.marginal_bins, None).map_err(core_err(STAGE))?;
    let w = (marginal.range.1 - marginal.range.0) / marginal.mass.len() as f64;
    write_csv(
        &dir.join("marginal_na.csv"),
        &["n_a", "density"],
        marginal.mass.iter().enumerate().map(|(k, m)| vec![num(marginal.bin_center(k)), num(m / w)]),
    )?;
    out.push("marginal_na.csv".into());
    let bins = BinSpec { nx: opts.density_bins, ny: opts.density_bins, range: None };
    for (projection, file, corner) in [
        (Projection::Optical, "density_optical.csv", "im_alpha\\re_alpha"),
        (Projection::Mechanical, "density_mechanical.csv", "im_beta\\re_beta"),
        (Projection::Populations, "density_populations.csv", "n_b\\n_a"),
    ] {
        let h = stationary_density(&records, projection, bins).map_err(core_err(STAGE))?;
        histogram_csv(&dir.join(file), &h, corner)?;
        out.push(file.into());
    }
    Ok(out)
}

pub fn load_ensemble(dir: &Path) -> CliResult<(EnsembleIndex, Vec<TrajectoryRecord>)> {
    let index: EnsembleIndex = read_json(&dir.join(ENSEMBLE_FILE))?;
    let records = index
        .trajectories
        .iter()
        .map(|t| {
            let path = dir.join(&t.file);
            storage::read_record(&path).map_err(|e| CliError::Integrity { path, detail: e.to_string() })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok((index, records))
}

// ----------------------------------------------------------------- segment

/// Trained model without the decoded paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationSummary {
    pub standardization: Standardization,
    pub initial: HmmParams,
    pub model: TrainedModel,
    pub separation: f64,
    pub melted: bool,
    /// Post-transient sample fraction labelled LC1 and LC2.
    pub occupation: [f64; 2],
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRuns {
    pub offset: usize,
    pub log_likelihood: f64,
    /// `(start, length, state)` with absolute starts.
    pub runs: Vec<(usize, usize, LcState)>,
}

pub fn segment(dir: &Path, records: &[TrajectoryRecord], opts: &AnalysisOptions, seed: u64) -> CliResult<Vec<PathBuf>> {
    let seg: Segmentation = hmm::segment(records, &opts.em_controls(), seed).map_err(core_err("segment"))?;
    if seg.melted {
        log::warn!("emission components are not separated (distance {:.3}); labels are unreliable", seg.separation);
    }
    let total: usize = seg.sequences.iter().map(|s| s.labels.len()).sum();
    let lc1: usize = seg.sequences.iter().flat_map(|s| &s.labels).filter(|&&l| l == LcState::LC1).count();
    let summary = SegmentationSummary {
        standardization: seg.standardization,
        initial: seg.initial.clone(),
        model: seg.model.clone(),
        separation: seg.separation,
        melted: seg.melted,
        occupation: [lc1 as f64 / total as f64, (total - lc1) as f64 / total as f64],
        seed,
    };
    write_json(&dir.join(SEGMENTATION_FILE), &summary)?;
    let labels: Vec<LabelRuns> = seg
        .sequences
        .iter()
        .map(|s| LabelRuns { offset: s.offset, log_likelihood: s.log_likelihood, runs: s.runs() })
        .collect();
    write_json(&dir.join(LABELS_FILE), &labels)?;
    Ok(vec![SEGMENTATION_FILE.into(), LABELS_FILE.into()])
}

pub fn load_labels(dir: &Path) -> CliResult<Vec<StateSequence>> {
    let path = dir.join(LABELS_FILE);
    let runs: Vec<LabelRuns> = read_json(&path)?;
    runs.iter()
        .map(|l| {
            let mut s = StateSequence::from_runs(l.offset, &l.runs)
                .map_err(|e| CliError::Integrity { path: path.clone(), detail: e.to_string() })?;
            s.log_likelihood = l.log_likelihood;
            Ok(s)
        })
        .collect()
}

// ---------------------------------------------------------------- survival

fn state_name(s: LcState) -> &'static str {
    match s {
        LcState::LC1 => "LC1",
        LcState::LC2 => "LC2",
    }
}

pub fn survival(dir: &Path, sequences: &[StateSequence], dt: f64) -> CliResult<Vec<PathBuf>> {
    let dwells = extract_dwells(sequences, dt).map_err(core_err("survival"))?;
    write_csv(
        &dir.join(DWELLS_FILE),
        &["trajectory", "start", "state", "duration", "entry_observed", "exit_observed"],
        dwells.iter().map(|d| {
            vec![
                d.trajectory.to_string(),
                d.start.to_string(),
                state_name(d.state).to_string(),
                num(d.duration),
                d.entry_observed.to_string(),
                d.exit_observed.to_string(),
            ]
        }),
    )?;
    let mut out = vec![PathBuf::from(DWELLS_FILE)];
    for state in [LcState::LC1, LcState::LC2] {
        let own: Vec<DwellRecord> = dwells.iter().filter(|d| d.state == state).copied().collect();
        let curve = kaplan_meier(&own);
        let file = format!("survival_{}.csv", state_name(state));
        write_csv(
            &dir.join(&file),
            &["t", "survival", "at_risk", "events"],
            (0..curve.times.len()).map(|i| {
                vec![num(curve.times[i]), num(curve.survival[i]), curve.at_risk[i].to_string(), curve.events[i].to_string()]
            }),
        )?;
        out.push(file.into());
    }
    Ok(out)
}

pub fn load_dwells(dir: &Path) -> CliResult<Vec<DwellRecord>> {
    let path = dir.join(DWELLS_FILE);
    let bad = |detail: String| CliError::Integrity { path: path.clone(), detail };
    let mut r = csv::Reader::from_path(&path).map_err(|e| bad(e.to_string()))?;
    r.records()
        .map(|row| {
            let row = row.map_err(|e| bad(e.to_string()))?;
            let field = |i: usize| row.get(i).ok_or_else(|| bad(format!("missing column {i}")));
            let parse_err = |e: &dyn std::fmt::Display| bad(e.to_string());
            Ok(DwellRecord {
                trajectory: field(0)?.parse().map_err(|e| parse_err(&e))?,
                start: field(1)?.parse().map_err(|e| parse_err(&e))?,
                state: match field(2)? {
                    "LC1" => LcState::LC1,
                    "LC2" => LcState::LC2,
                    other => return Err(bad(format!("unknown state {other}"))),
                },
                duration: field(3)?.parse().map_err(|e| parse_err(&e))?,
                entry_observed: field(4)?.parse().map_err(|e| parse_err(&e))?,
                exit_observed: field(5)?.parse().map_err(|e| parse_err(&e))?,
            })
        })
        .collect()
}

// --------------------------------------------------------------- fit-rates

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Ok,
    NoLinearTail,
    Refused,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionRate {
    pub direction: Direction,
    pub status: FitStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub t0: Option<f64>,
    pub fit: Option<RateFit>,
    pub incident_records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatesFile {
    pub aleph: f64,
    pub directions: Vec<DirectionRate>,
    /// `k12 + k21` when both rates exist.
    pub lambda_eff: Option<f64>,
    /// Stationary occupations `(p1, p2)` implied by the rates.
    pub occupations: Option<[f64; 2]>,
}

impl RatesFile {
    pub fn rate(&self, d: Direction) -> Option<&RateFit> {
        self.directions.iter().find(|r| r.direction == d).and_then(|r| r.fit.as_ref())
    }
}

fn candidates_csv(path: &Path, c: &[ThresholdCandidate]) -> CliResult<()> {
    write_csv(
        path,
        &["t0", "k_head", "k_tail", "z", "accepted"],
        c.iter().map(|c| vec![num(c.t0), num(c.k_head), num(c.k_tail), num(c.z), c.accepted.to_string()]),
    )
}

pub fn fit_rates(
    dir: &Path,
    aleph: f64,
    dwells: &[DwellRecord],
    opts: &AnalysisOptions,
    seed_for: impl Fn(Direction) -> u64,
) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut directions = Vec::new();
    for d in DIRECTIONS {
        let own: Vec<DwellRecord> = dwells.iter().filter(|r| r.state == d.from_state()).copied().collect();
        let incident_records = own.iter().filter(|r| r.is_incident()).count();
        let curve = kaplan_meier(&own);
        let entry = |status, reason: String, t0, fit| DirectionRate {
            direction: d,
            status,
            reason: Some(reason).filter(|r| !r.is_empty()),
            t0,
            fit,
            incident_records,
        };
        let rate = match select_t0(&curve, &opts.threshold) {
            Err(e) => entry(FitStatus::NoLinearTail, e.to_string(), None, None),
            Ok(sel) => {
                let file = format!("thresholds_{}.csv", d.as_str());
                candidates_csv(&dir.join(&file), &sel.candidates)?;
                out.push(file.into());
                let controls = RateControls {
                    min_records: opts.min_records,
                    n_bootstrap: opts.n_bootstrap,
                    confidence: opts.confidence,
                    seed: seed_for(d),
                };
                match fit_conditional_rate(&own, sel.t0, &controls) {
                    Ok(fit) => entry(FitStatus::Ok, String::new(), Some(sel.t0), Some(fit)),
                    Err(e) => entry(FitStatus::Refused, e.to_string(), Some(sel.t0), None),
                }
            }
        };
        if rate.status != FitStatus::Ok {
            log::warn!("no rate for direction {}: {}", d.as_str(), rate.reason.as_deref().unwrap_or(""));
        }
        directions.push(rate);
    }
    let mut file = RatesFile { aleph, directions, lambda_eff: None, occupations: None };
    if let (Some(k12), Some(k21)) = (file.rate(Direction::D12).map(|f| f.k), file.rate(Direction::D21).map(|f| f.k)) {
        file.lambda_eff = effective_relaxation(k12, k21).ok();
        file.occupations = stationary_occupations(k12, k21).ok();
    }
    write_json(&dir.join(RATES_FILE), &file)?;
    out.push(RATES_FILE.into());
    Ok(out)
}

// --------------------------------------------------------- escape geometry

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeOptions {
    pub kappa_a: f64,
    pub directions: Vec<Direction>,
    pub phase_bins: usize,
    /// Filters of the exit-phase histograms, in reported time.
    pub histogram_filters: EventFilters,
    /// Filters of the conditioned densities, in reported time.
    pub density_filters: EventFilters,
    /// Snapshot lags in reported time.
    pub tau_snapshots: Vec<f64>,
    pub density_bins: usize,
}

impl EscapeOptions {
    pub fn from_analysis(opts: &AnalysisOptions, kappa_a: f64) -> Self {
        let t = |x: f64| x / kappa_a;
        Self {
            kappa_a,
            directions: opts.directions.clone(),
            phase_bins: opts.phase_bins,
            histogram_filters: EventFilters { pre_min: t(opts.pre_min), post_min: t(opts.post_min) },
            density_filters: EventFilters { pre_min: t(opts.pre_min), post_min: t(opts.density_post_min) },
            tau_snapshots: opts.tau_snapshots.iter().map(|&x| t(x)).collect(),
            density_bins: opts.density_bins,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionEscape {
    pub direction: Direction,
    pub n_events: usize,
    pub n_density_events: usize,
    /// Set when the direction has no qualifying events and its tables are omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omitted: Option<String>,
    /// Circular statistics of the optical phase at `tau = 0`.
    pub exit_phase: Option<CircularStats>,
    /// Circular standard deviation a uniform sample of the same size stays
    /// above with probability 0.99.
    pub uniform_reference_std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hazard_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeSummary {
    pub options: EscapeOptions,
    pub directions: Vec<DirectionEscape>,
    pub stationary_samples: [usize; 2],
}

impl EscapeSummary {
    pub fn direction(&self, d: Direction) -> Option<&DirectionEscape> {
        self.directions.iter().find(|x| x.direction == d)
    }
}

pub fn escape_geometry(
    dir: &Path,
    records: &[TrajectoryRecord],
    sequences: &[StateSequence],
    opts: &EscapeOptions,
) -> CliResult<Vec<PathBuf>> {
    const STAGE: &str = "escape-geometry";
    let err = core_err(STAGE);
    let dt = records.first().ok_or_else(|| CliError::stage(STAGE, "no trajectories"))?.dt_sample;
    let events = find_events(sequences, dt, &opts.histogram_filters).map_err(&err)?;
    let density_events = find_events(sequences, dt, &opts.density_filters).map_err(&err)?;
    let mut out = Vec::new();

    write_csv(
        &dir.join("escape/events.csv"),
        &["trajectory", "direction", "switch_index", "t_switch", "t_cross", "pre_dwell", "post_dwell"],
        events.iter().map(|e| {
            vec![
                e.trajectory.to_string(),
                e.direction.as_str().to_string(),
                e.switch_index.to_string(),
                num(e.t_switch),
                num(e.t_cross),
                num(e.pre_dwell),
                num(e.post_dwell),
            ]
        }),
    )?;
    out.push("escape/events.csv".into());

    let nb = opts.phase_bins;
    let centers: Vec<f64> = (0..nb).map(|k| bin_center(k, nb)).collect();
    let stat = [LcState::LC1, LcState::LC2].map(|s| stationary_phase_distribution(records, sequences, s, nb));
    let stationary_samples = [0, 1].map(|i| stat[i].as_ref().map(|d| d.samples).unwrap_or(0));
    write_csv(
        &dir.join("escape/stationary_phase.csv"),
        &["phi", "LC1", "LC2"],
        (0..nb).map(|k| {
            let col = |i: usize| stat[i].as_ref().map(|d| num(d.density[k])).unwrap_or_default();
            vec![num(centers[k]), col(0), col(1)]
        }),
    )?;
    out.push("escape/stationary_phase.csv".into());

    let grid = PhaseGrid { bins: nb, ..PhaseGrid::standard(opts.kappa_a) };
    let mut directions = Vec::new();
    for &d in &opts.directions {
        let tag = d.as_str();
        let own: Vec<SwitchEvent> = events.iter().filter(|e| e.direction == d).copied().collect();
        let own_density: Vec<SwitchEvent> = density_events.iter().filter(|e| e.direction == d).copied().collect();
        let mut summary = DirectionEscape {
            direction: d,
            n_events: own.len(),
            n_density_events: own_density.len(),
            omitted: None,
            exit_phase: None,
            uniform_reference_std: None,
            hazard_error: None,
        };
        if own.is_empty() {
            summary.omitted = Some(format!("no {tag} events pass the dwell filters"));
            directions.push(summary);
            continue;
        }
        let hist = phase_histogram(&own, records, d, &grid).map_err(&err)?;
        let taus = hist.taus();
        let rows: Vec<Vec<String>> = hist.density.iter().map(|c| c.iter().map(|v| num(*v)).collect()).collect();
        let file = format!("escape/phase_{tag}.csv");
        write_matrix_csv(&dir.join(&file), "tau\\phi", &centers, &taus, &rows)?;
        out.push(file.into());

        let phases = exit_phases(&own, records, d, 0);
        summary.exit_phase = CircularStats::from_angles(&phases);
        summary.uniform_reference_std = (!phases.is_empty()).then(|| uniform_reference_std(phases.len(), 0.01));

        match (&stat[d.from_state().index()], &stat[d.to_state().index()]) {
            (Ok(from), Ok(to)) => match escape::hazard(&hist, from, to) {
                Ok(h) => {
                    let file = format!("escape/hazard_{tag}.csv");
                    write_csv(
                        &dir.join(&file),
                        &["phi", "hazard", "exit_density", "stationary_density"],
                        (0..nb).map(|k| {
                            let raw = hist.column_at_lag(0).map(|c| c[k]).unwrap_or(0.0);
                            vec![num(h.phases[k]), opt(h.hazard[k]), num(raw), num(from.density[k])]
                        }),
                    )?;
                    out.push(file.into());
                    let rows: Vec<Vec<String>> = h.conditional.iter().map(|c| c.iter().map(|v| opt(*v)).collect()).collect();
                    let file = format!("escape/conditional_{tag}.csv");
                    write_matrix_csv(&dir.join(&file), "tau\\phi", &centers, &taus, &rows)?;
                    out.push(file.into());
                }
                Err(e) => summary.hazard_error = Some(e.to_string()),
            },
            _ => summary.hazard_error = Some("a basin has no labelled samples".into()),
        }

        if !own_density.is_empty() && !opts.tau_snapshots.is_empty() {
            let bins = BinSpec { nx: opts.density_bins, ny: opts.density_bins, range: None };
            let snaps = conditioned_density(&own_density, records, &opts.tau_snapshots, Projection::Optical, bins);
            match snaps {
                Ok(snaps) => {
                    for s in snaps {
                        let file = format!("escape/density_{tag}_tau_{}.csv", num(s.tau * opts.kappa_a));
                        histogram_csv(&dir.join(&file), &s.histogram, "im_alpha\\re_alpha")?;
                        out.push(file.into());
                    }
                }
                Err(e) => log::warn!("conditioned densities for {tag} skipped: {e}"),
            }
        }
        directions.push(summary);
    }
    let summary = EscapeSummary { options: opts.clone(), directions, stationary_samples };
    write_json(&dir.join(ESCAPE_FILE), &summary)?;
    out.push(ESCAPE_FILE.into());
    Ok(out)
}

// ----------------------------------------------------------------- scaling

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingEntry {
    pub direction: Direction,
    pub form: ScalingForm,
    pub points: Vec<ScalingPoint>,
    pub fit: Option<ScalingFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

/// Minimum number of alephs for each fit form.
pub fn min_points(form: ScalingForm) -> usize {
    match form {
        ScalingForm::Single => 3,
        ScalingForm::Biexp => 5,
    }
}

/// Rates of direction `d` with a usable uncertainty, one per aleph.
pub fn scaling_points(rates: &[RatesFile], d: Direction) -> Vec<ScalingPoint> {
    rates
        .iter()
        .filter_map(|r| r.rate(d).map(|f| ScalingPoint { aleph: r.aleph, k: f.k, sigma: f.sigma }))
        .filter(|p| p.sigma > 0.0)
        .collect()
}

pub fn scaling(dir: &Path, rates: &[RatesFile]) -> CliResult<Vec<PathBuf>> {
    scaling_from_points(dir, [scaling_points(rates, Direction::D12), scaling_points(rates, Direction::D21)])
}

/// Single and biexponential fits of `points[0]` (1->2) and `points[1]` (2->1).
pub fn scaling_from_points(dir: &Path, points: [Vec<ScalingPoint>; 2]) -> CliResult<Vec<PathBuf>> {
    let mut entries = Vec::new();
    for (d, points) in DIRECTIONS.into_iter().zip(points) {
        for form in [ScalingForm::Single, ScalingForm::Biexp] {
            let mut e = ScalingEntry { direction: d, form, points: points.clone(), fit: None, skipped: None };
            if points.len() < min_points(form) {
                e.skipped = Some(format!("{} rates available, {} needed", points.len(), min_points(form)));
            } else {
                match fit_scaling(d, &points, form) {
                    Ok(f) => e.fit = Some(f),
                    Err(err) => e.skipped = Some(err.to_string()),
                }
            }
            entries.push(e);
        }
    }
    write_json(&dir.join(SCALING_FILE), &entries)?;
    Ok(vec![SCALING_FILE.into()])
}

/// Reads `aleph,k12,sigma12,k21,sigma21` rows; empty cells skip that rate.
pub fn read_rate_table(path: &Path) -> CliResult<[Vec<ScalingPoint>; 2]> {
    let bad = |detail: String| CliError::Config(format!("{}: {detail}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let mut out = [Vec::new(), Vec::new()];
    for row in r.records() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let field = |i: usize| -> CliResult<Option<f64>> {
            match row.get(i).map(str::trim) {
                None | Some("") => Ok(None),
                Some(v) => v.parse().map(Some).map_err(|_| bad(format!("cannot parse {v:?}"))),
            }
        };
        let aleph = field(0)?.ok_or_else(|| bad("missing aleph".into()))?;
        for (i, points) in out.iter_mut().enumerate() {
            if let (Some(k), Some(sigma)) = (field(1 + 2 * i)?, field(2 + 2 * i)?) {
                points.push(ScalingPoint { aleph, k, sigma });
            }
        }
    }
    Ok(out)
}

/// Fitted rate and effective action on `n` alephs spanning each fit's data.
pub fn scaling_curve_rows(entries: &[ScalingEntry], n: usize) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for e in entries {
        let Some(fit) = &e.fit else { continue };
        let lo = e.points.iter().map(|p| p.aleph).fold(f64::INFINITY, f64::min);
        let hi = e.points.iter().map(|p| p.aleph).fold(f64::NEG_INFINITY, f64::max);
        let form = match e.form {
            ScalingForm::Single => "single",
            ScalingForm::Biexp => "biexp",
        };
        for i in 0..n {
            let a = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            rows.push(vec![e.direction.as_str().to_string(), form.to_string(), num(a), num(fit.rate(a)), num(fit.effective_action(a))]);
        }
    }
    rows
}

pub const SCALING_CURVE_HEADER: [&str; 5] = ["direction", "form", "aleph", "rate", "effective_action"];
