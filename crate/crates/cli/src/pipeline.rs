//! Resumable execution of the stages with a checksummed manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use lcswitch_core::model::ScalingPlan;
use lcswitch_core::stats::Direction;
use serde::Serialize;

use crate::artifacts::{read_json, sha256_hex, write_bytes, FileEntry};
use crate::config::{aleph_dir, RunConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::{RunManifest, StageRecord, StageStatus};
use crate::seeds;
use crate::stages::{self, EnsembleIndex, EscapeOptions, RatesFile};

pub const CONFIG_SNAPSHOT: &str = "config.toml";

/// Stages in execution order. The first five run once per aleph,
/// `Scaling` once per run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Simulate,
    Segment,
    Survival,
    FitRates,
    EscapeGeometry,
    Scaling,
}

impl Stage {
    pub const ALL: [Stage; 6] =
        [Stage::Simulate, Stage::Segment, Stage::Survival, Stage::FitRates, Stage::EscapeGeometry, Stage::Scaling];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Segment => "segment",
            Stage::Survival => "survival",
            Stage::FitRates => "fit-rates",
            Stage::EscapeGeometry => "escape-geometry",
            Stage::Scaling => "scaling",
        }
    }

    /// Manifest name of the stage for one aleph, e.g. `aleph_3/segment`.
    pub fn record_name(self, aleph: Option<f64>) -> String {
        match aleph {
            Some(a) => format!("{}/{}", aleph_dir(a), self.as_str()),
            None => self.as_str().to_string(),
        }
    }
}

/// Stage names a complete run of `config` produces, in order.
pub fn expected_stages(config: &RunConfig) -> Vec<String> {
    let mut names: Vec<String> = config
        .alephs
        .iter()
        .flat_map(|&a| Stage::ALL[..5].iter().map(move |s| s.record_name(Some(a))))
        .collect();
    names.push(Stage::Scaling.record_name(None));
    names
}

struct Runner<'a> {
    root: &'a Path,
    previous: Option<RunManifest>,
    manifest: RunManifest,
}

impl Runner<'_> {
    fn outputs_of(&self, name: &str) -> Vec<FileEntry> {
        self.manifest.stage(name).map(|s| s.outputs.clone()).unwrap_or_default()
    }

    fn reusable(&self, name: &str, inputs_hash: &str) -> CliResult<Option<StageRecord>> {
        let Some(prev) = self.previous.as_ref().and_then(|m| m.stage(name)) else {
            return Ok(None);
        };
        if prev.status != StageStatus::Done || prev.inputs_hash != inputs_hash {
            return Ok(None);
        }
        for f in &prev.outputs {
            if !f.verify(self.root)? {
                log::info!("{name}: {} is missing, recomputing", f.path.display());
                return Ok(None);
            }
        }
        Ok(Some(prev.clone()))
    }

    /// Runs `body` unless an identical completed record exists. `body`
    /// returns paths relative to `prefix`.
    fn run<S: Serialize>(
        &mut self,
        name: String,
        prefix: &Path,
        section: &S,
        upstream: &[&str],
        body: impl FnOnce() -> CliResult<Vec<PathBuf>>,
    ) -> CliResult<()> {
        let inputs: Vec<Vec<FileEntry>> = upstream.iter().map(|u| self.outputs_of(u)).collect();
        let inputs_hash =
            sha256_hex(&serde_json::to_vec(&(&name, section, &inputs)).expect("stage inputs serialize"));
        if let Some(record) = self.reusable(&name, &inputs_hash)? {
            log::info!("{name}: up to date");
            self.manifest.run.reused.push(name);
            self.manifest.upsert(record);
            return Ok(());
        }
        log::info!("{name}: running");
        let start = Instant::now();
        let result = body().and_then(|paths| {
            paths.iter().map(|p| FileEntry::of(self.root, &prefix.join(p))).collect::<CliResult<Vec<_>>>()
        });
        self.manifest.run.timing.insert(name.clone(), start.elapsed().as_secs_f64());
        self.manifest.run.executed.push(name.clone());
        match result {
            Ok(outputs) => {
                self.manifest.upsert(StageRecord { name, inputs_hash, status: StageStatus::Done, outputs, diagnostic: None });
                self.manifest.save(self.root)
            }
            Err(e) => {
                self.manifest.upsert(StageRecord {
                    name,
                    inputs_hash,
                    status: StageStatus::Failed,
                    outputs: Vec::new(),
                    diagnostic: Some(e.to_string()),
                });
                self.manifest.save(self.root)?;
                Err(e)
            }
        }
    }
}

#[derive(Serialize)]
struct SimulateSection<'a> {
    plan: ScalingPlan,
    spec: lcswitch_core::qjump::EnsembleSpec,
    cutoffs: lcswitch_core::model::FockCutoffs,
    seed: u64,
    marginal_bins: usize,
    density_bins: usize,
    tool: &'a str,
}

/// Runs every stage of `config`.
pub fn run_pipeline(config: &RunConfig) -> CliResult<RunManifest> {
    run_until(config, Stage::Scaling)
}

/// Runs the stages up to and including `last`; completed stages whose
/// inputs are unchanged are reused.
pub fn run_until(config: &RunConfig, last: Stage) -> CliResult<RunManifest> {
    config.validate()?;
    let root = config.output_root.as_path();
    crate::artifacts::ensure_dir(root)?;
    let mut snapshot = config.clone();
    snapshot.output_root = PathBuf::new();
    write_bytes(&root.join(CONFIG_SNAPSHOT), snapshot.to_toml().as_bytes())?;

    let previous = RunManifest::load(root)?;
    if let Some(prev) = &previous {
        // a tampered artifact is reported even if its stage will be rerun
        prev.verify(root)?;
    }
    let mut runner = Runner { root, previous, manifest: RunManifest::new(config.content_hash()) };
    let opts = &config.analysis;
    let spec = config.spec();

    for &aleph in &config.alephs {
        let rel = PathBuf::from(aleph_dir(aleph));
        let dir = root.join(&rel);
        let name = |s: Stage| s.record_name(Some(aleph));
        let plan = ScalingPlan::new(aleph, config.scheme, config.base);

        let sim_seed = seeds::simulation(config.master_seed, aleph);
        let cutoffs = config.cutoffs_for(aleph);
        let section = SimulateSection {
            plan,
            spec,
            cutoffs,
            seed: sim_seed,
            marginal_bins: opts.marginal_bins,
            density_bins: opts.density_bins,
            tool: crate::manifest::TOOL_VERSION,
        };
        runner.run(name(Stage::Simulate), &rel, &section, &[], || {
            stages::simulate(&dir, &plan, &spec, cutoffs, sim_seed, opts)
        })?;
        if last == Stage::Simulate {
            continue;
        }

        let km_seed = seeds::kmeans(config.master_seed, aleph);
        let em = opts.em_controls();
        runner.run(name(Stage::Segment), &rel, &(em, km_seed), &[&name(Stage::Simulate)], || {
            let (_, records) = stages::load_ensemble(&dir)?;
            stages::segment(&dir, &records, opts, km_seed)
        })?;
        if last == Stage::Segment {
            continue;
        }

        runner.run(name(Stage::Survival), &rel, &spec.dt_sample, &[&name(Stage::Segment)], || {
            let labels = stages::load_labels(&dir)?;
            stages::survival(&dir, &labels, spec.dt_sample)
        })?;
        if last == Stage::Survival {
            continue;
        }

        let boot = |d: Direction| seeds::bootstrap(config.master_seed, aleph, d.as_str());
        let rate_section = (
            &opts.threshold,
            opts.min_records,
            opts.n_bootstrap,
            opts.confidence,
            boot(Direction::D12),
            boot(Direction::D21),
        );
        runner.run(name(Stage::FitRates), &rel, &rate_section, &[&name(Stage::Survival)], || {
            let dwells = stages::load_dwells(&dir)?;
            stages::fit_rates(&dir, aleph, &dwells, opts, boot)
        })?;
        if last == Stage::FitRates {
            continue;
        }

        let esc = EscapeOptions::from_analysis(opts, config.base.kappa_a);
        runner.run(
            name(Stage::EscapeGeometry),
            &rel,
            &esc,
            &[&name(Stage::Simulate), &name(Stage::Segment)],
            || {
                let (_, records) = stages::load_ensemble(&dir)?;
                let labels = stages::load_labels(&dir)?;
                stages::escape_geometry(&dir, &records, &labels, &esc)
            },
        )?;
    }

    if last == Stage::Scaling {
        let upstream: Vec<String> = config.alephs.iter().map(|&a| Stage::FitRates.record_name(Some(a))).collect();
        let upstream_refs: Vec<&str> = upstream.iter().map(String::as_str).collect();
        runner.run(Stage::Scaling.record_name(None), Path::new(""), &(), &upstream_refs, || {
            let rates = config
                .alephs
                .iter()
                .map(|&a| read_json::<RatesFile>(&root.join(aleph_dir(a)).join(stages::RATES_FILE)))
                .collect::<CliResult<Vec<_>>>()?;
            stages::scaling(root, &rates)
        })?;
    }
    runner.manifest.save(root)?;
    Ok(runner.manifest)
}

/// Loads a manifest and fails unless every recorded file is present and intact.
pub fn load_verified(root: &Path) -> CliResult<RunManifest> {
    let manifest = RunManifest::load(root)?.ok_or_else(|| CliError::Integrity {
        path: root.join(crate::manifest::MANIFEST_FILE),
        detail: "no manifest".into(),
    })?;
    if manifest.compute_hash() != manifest.manifest_hash {
        return Err(CliError::Integrity {
            path: root.join(crate::manifest::MANIFEST_FILE),
            detail: "manifest hash does not match its content".into(),
        });
    }
    if let Some(missing) = manifest.verify(root)?.first() {
        return Err(CliError::Integrity { path: root.join(&missing.path), detail: "file is missing".into() });
    }
    Ok(manifest)
}

pub fn ensemble_index(root: &Path, aleph: f64) -> CliResult<EnsembleIndex> {
    read_json(&root.join(aleph_dir(aleph)).join(stages::ENSEMBLE_FILE))
}
