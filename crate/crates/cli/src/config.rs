use std::path::{Path, PathBuf};

use lcswitch_core::hmm::{CovarianceKind, EmControls};
use lcswitch_core::model::{FockCutoffs, Scheme, SystemParams};
use lcswitch_core::qjump::{EnsembleSpec, InitialStatePolicy};
use lcswitch_core::stats::{Direction, ThresholdControls};
use serde::{Deserialize, Serialize};

use crate::artifacts::sha256_hex;
use crate::error::{CliError, CliResult};

/// Smallest aleph accepted by the rate pipeline without `allow_melted`.
pub const MELTED_ALEPH: f64 = 2.0;

/// Ensemble settings; unset durations default to multiples of `1/κa`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_traj: usize,
    #[serde(default)]
    pub t_transient: Option<f64>,
    #[serde(default)]
    pub t_total_post: Option<f64>,
    #[serde(default)]
    pub dt_sample: Option<f64>,
    #[serde(default)]
    pub initial: InitialStatePolicy,
    #[serde(default)]
    pub dt_max: Option<f64>,
}

impl EnsembleConfig {
    pub fn spec(&self, kappa_a: f64) -> EnsembleSpec {
        let d = EnsembleSpec::with_kappa_a(kappa_a, self.n_traj);
        EnsembleSpec {
            t_transient: self.t_transient.unwrap_or(d.t_transient),
            t_total_post: self.t_total_post.unwrap_or(d.t_total_post),
            dt_sample: self.dt_sample.unwrap_or(d.dt_sample),
            initial: self.initial,
            dt_max: self.dt_max,
            ..d
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisOptions {
    pub em_max_iter: usize,
    pub em_rel_tol: f64,
    pub covariance: CovarianceKind,
    pub threshold: ThresholdControls,
    pub min_records: usize,
    pub n_bootstrap: usize,
    pub confidence: f64,
    pub phase_bins: usize,
    /// Directions analysed by the escape-geometry stage.
    pub directions: Vec<Direction>,
    /// Minimum dwell before a switch, in units of `1/κa`.
    pub pre_min: f64,
    /// Minimum dwell after a switch for exit-phase histograms, in units of `1/κa`.
    pub post_min: f64,
    /// Minimum dwell after a switch for conditioned densities, in units of `1/κa`.
    pub density_post_min: f64,
    /// Lags of the conditioned densities in units of `1/κa`.
    pub tau_snapshots: Vec<f64>,
    pub density_bins: usize,
    pub marginal_bins: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        let em = EmControls::default();
        Self {
            em_max_iter: em.max_iter,
            em_rel_tol: em.rel_tol,
            covariance: em.covariance,
            threshold: ThresholdControls::default(),
            min_records: 20,
            n_bootstrap: 1000,
            confidence: 0.95,
            phase_bins: 72,
            directions: vec![Direction::D12, Direction::D21],
            pre_min: 15.0,
            post_min: 2.0,
            density_post_min: 10.0,
            tau_snapshots: vec![-5.0, -0.01, 0.5, 10.0],
            density_bins: 60,
            marginal_bins: 120,
        }
    }
}

impl AnalysisOptions {
    pub fn em_controls(&self) -> EmControls {
        EmControls { max_iter: self.em_max_iter, rel_tol: self.em_rel_tol, covariance: self.covariance }
    }
}

/// One run: a sweep over `alephs` at fixed base parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "working_point")]
    pub base: SystemParams,
    pub alephs: Vec<f64>,
    #[serde(default = "scheme_a")]
    pub scheme: Scheme,
    pub ensemble: EnsembleConfig,
    /// `[n_a_max, n_b_max]`, either one pair for all alephs or one per aleph.
    pub cutoffs: Vec<[usize; 2]>,
    #[serde(default)]
    pub analysis: AnalysisOptions,
    pub master_seed: u64,
    #[serde(default)]
    pub output_root: PathBuf,
    #[serde(default)]
    pub allow_melted: bool,
}

fn working_point() -> SystemParams {
    SystemParams::WORKING_POINT
}

fn scheme_a() -> Scheme {
    Scheme::TheoryA
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        self.base.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.alephs.is_empty() {
            return bad("alephs must not be empty".into());
        }
        for (i, &a) in self.alephs.iter().enumerate() {
            if !(a > 0.0 && a.is_finite()) {
                return bad(format!("aleph {a} must be positive"));
            }
            if self.alephs[..i].contains(&a) {
                return bad(format!("aleph {a} is listed twice"));
            }
            if a < MELTED_ALEPH && !self.allow_melted {
                return bad(format!(
                    "aleph = {a} lies in the quantum-melted regime (aleph < {MELTED_ALEPH}) where the two basins \
                     merge and rates are undefined; set allow_melted = true to override"
                ));
            }
        }
        if self.cutoffs.len() != 1 && self.cutoffs.len() != self.alephs.len() {
            return bad(format!("expected 1 or {} cutoff pairs, got {}", self.alephs.len(), self.cutoffs.len()));
        }
        for a in &self.alephs {
            self.cutoffs_for(*a).validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        self.ensemble.spec(self.base.kappa_a).validate().map_err(|e| CliError::Config(e.to_string()))?;
        let o = &self.analysis;
        if o.phase_bins == 0 || o.density_bins == 0 || o.marginal_bins < 3 {
            return bad("histogram bin counts must be positive".into());
        }
        if !(o.pre_min >= 0.0 && o.post_min >= 0.0 && o.density_post_min >= 0.0) {
            return bad("dwell filters must be non-negative".into());
        }
        if o.directions.is_empty() {
            return bad("at least one escape direction is required".into());
        }
        if !(o.confidence > 0.0 && o.confidence < 1.0) || o.n_bootstrap == 0 {
            return bad("bootstrap needs replicates and a confidence in (0, 1)".into());
        }
        Ok(())
    }

    pub fn cutoffs_for(&self, aleph: f64) -> FockCutoffs {
        let i = if self.cutoffs.len() == 1 { 0 } else { self.alephs.iter().position(|&a| a == aleph).unwrap_or(0) };
        let [na, nb] = self.cutoffs[i];
        FockCutoffs::new(na, nb)
    }

    pub fn spec(&self) -> EnsembleSpec {
        self.ensemble.spec(self.base.kappa_a)
    }

    /// Hash of everything that determines the numbers; the output location
    /// is excluded.
    pub fn content_hash(&self) -> String {
        let mut c = self.clone();
        c.output_root = PathBuf::new();
        sha256_hex(&serde_json::to_vec(&c).expect("configuration serializes"))
    }
}

/// Directory name of one aleph, e.g. `aleph_3` or `aleph_2.5`.
pub fn aleph_dir(aleph: f64) -> String {
    format!("aleph_{aleph}")
}
