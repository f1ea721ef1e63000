use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::propagator::{step, Generator, JumpEvent, Workspace};
use super::rng::{trajectory_rng, trajectory_seed};
use crate::error::{Error, Result};
use crate::model::{resolve_params, FockCutoffs, QuantumState, ScalingPlan, Scheme};

/// Samples closer than this fraction of a cutoff count as saturated.
const SATURATION_FRACTION: f64 = 0.9;
/// Consecutive saturated samples that raise a truncation warning.
const SATURATION_RUN: usize = 10;

/// How the initial coherent state is chosen. Amplitudes are in rescaled
/// units and multiplied by `sqrt(aleph)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialStatePolicy {
    /// `alpha` uniform on the disk of the given radius, `beta = 0`.
    UniformDisk { radius: f64 },
    Coherent { alpha: Complex64, beta: Complex64 },
    /// Fock state given in raw occupation numbers.
    Fock { n_a: usize, n_b: usize },
}

impl Default for InitialStatePolicy {
    fn default() -> Self {
        Self::UniformDisk { radius: 5.0 }
    }
}

/// Durations are in reported time units (`t' = sqrt(aleph) t` under scheme B).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n_traj: usize,
    pub t_transient: f64,
    pub t_total_post: f64,
    pub dt_sample: f64,
    pub initial: InitialStatePolicy,
    /// Upper bound on the propagation step; `None` uses the generator default.
    pub dt_max: Option<f64>,
}

impl EnsembleSpec {
    /// Defaults tied to the optical decay rate: transient `500/κa`,
    /// `2000/κa` recorded afterwards, sampling every `0.1/κa`.
    pub fn with_kappa_a(kappa_a: f64, n_traj: usize) -> Self {
        Self {
            n_traj,
            t_transient: 500.0 / kappa_a,
            t_total_post: 2000.0 / kappa_a,
            dt_sample: 0.1 / kappa_a,
            initial: InitialStatePolicy::default(),
            dt_max: None,
        }
    }

    pub fn t_final(&self) -> f64 {
        self.t_transient + self.t_total_post
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.n_traj == 0 {
            return bad("n_traj must be at least 1");
        }
        if !(self.t_transient >= 0.0 && self.t_total_post > 0.0 && self.dt_sample > 0.0) {
            return bad("durations must be positive");
        }
        if self.dt_sample > self.t_final() {
            return bad("sampling interval exceeds the simulated time");
        }
        if let Some(h) = self.dt_max {
            if !(h > 0.0) {
                return bad("dt_max must be positive");
            }
        }
        if let InitialStatePolicy::UniformDisk { radius } = self.initial {
            if !(radius >= 0.0 && radius.is_finite()) {
                return bad("initial radius must be non-negative");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TruncationWarnings {
    pub optical: bool,
    pub mechanical: bool,
}

impl TruncationWarnings {
    pub fn any(&self) -> bool {
        self.optical || self.mechanical
    }
}

/// Uniformly sampled rescaled observables of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub aleph: f64,
    pub scheme: Scheme,
    pub cutoffs: FockCutoffs,
    pub dt_sample: f64,
    pub transient_cut: f64,
    pub times: Vec<f64>,
    pub n_a: Vec<f64>,
    pub n_b: Vec<f64>,
    pub alpha: Vec<Complex64>,
    pub beta: Vec<Complex64>,
    pub jumps: Vec<JumpEvent>,
    pub warnings: TruncationWarnings,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the first sample at or after the transient cut.
    pub fn transient_index(&self) -> usize {
        ((self.transient_cut / self.dt_sample) - 1e-9).ceil().max(0.0) as usize
    }

    pub fn post_transient_range(&self) -> std::ops::Range<usize> {
        self.transient_index().min(self.len())..self.len()
    }

    /// Checks the structural invariants of a record.
    pub fn validate(&self) -> Result<()> {
        let n = self.times.len();
        if [self.n_a.len(), self.n_b.len(), self.alpha.len(), self.beta.len()].iter().any(|&l| l != n) {
            return Err(Error::Format("column lengths differ".into()));
        }
        if self.n_a.iter().chain(&self.n_b).any(|v| !(*v >= 0.0)) {
            return Err(Error::Format("negative or non-finite population".into()));
        }
        for (k, t) in self.times.iter().enumerate() {
            if (t - k as f64 * self.dt_sample).abs() > 1e-9 * self.dt_sample.max(t.abs()) {
                return Err(Error::Format(format!("sample {k} is off the uniform grid")));
            }
        }
        if self.jumps.windows(2).any(|w| w[1].time <= w[0].time) {
            return Err(Error::Format("jump times are not strictly increasing".into()));
        }
        Ok(())
    }
}

fn initial_state<R: Rng>(policy: &InitialStatePolicy, c: FockCutoffs, scale: f64, rng: &mut R) -> QuantumState {
    let zero = Complex64::new(0.0, 0.0);
    match *policy {
        InitialStatePolicy::UniformDisk { radius } => {
            let r = radius * rng.random::<f64>().sqrt();
            let phi = 2.0 * PI * rng.random::<f64>();
            QuantumState::coherent(c, Complex64::from_polar(r * scale, phi), zero)
        }
        InitialStatePolicy::Coherent { alpha, beta } => QuantumState::coherent(c, alpha * scale, beta * scale),
        InitialStatePolicy::Fock { n_a, n_b } => QuantumState::fock(c, n_a.min(c.n_a_max), n_b.min(c.n_b_max)),
    }
}

/// Shared, immutable ingredients of an ensemble.
#[derive(Debug, Clone)]
pub struct EnsembleSetup {
    pub spec: EnsembleSpec,
    pub plan: ScalingPlan,
    pub generator: Generator,
    pub time_factor: f64,
    /// Propagation step in raw time and the number of steps per sample.
    pub dt: f64,
    pub steps_per_sample: usize,
}

impl EnsembleSetup {
    pub fn new(spec: EnsembleSpec, plan: ScalingPlan, cutoffs: FockCutoffs) -> Result<Self> {
        spec.validate()?;
        cutoffs.validate()?;
        let resolved = resolve_params(&plan)?;
        let generator = Generator::new(resolved.params, cutoffs)?;
        let tf = resolved.time_factor;
        let dt_max = spec.dt_max.unwrap_or_else(|| generator.default_dt());
        let (dt, steps_per_sample) = generator.step_for_interval(spec.dt_sample / tf, dt_max);
        Ok(Self { spec, plan, generator, time_factor: tf, dt, steps_per_sample })
    }

    pub fn n_samples(&self) -> usize {
        (self.spec.t_final() / self.spec.dt_sample + 1e-9).floor() as usize + 1
    }

    /// Runs one trajectory; the outcome depends only on `seed`.
    pub fn run(&self, seed: u64) -> Result<TrajectoryRecord> {
        let g = &self.generator;
        let c = g.cutoffs();
        let aleph = self.plan.aleph;
        let scale = aleph.sqrt();
        let mut rng = trajectory_rng(seed);
        let mut psi = initial_state(&self.spec.initial, c, self.plan.amplitude_scale(), &mut rng);
        let mut ws = Workspace::new(g);

        let n = self.n_samples();
        let mut rec = TrajectoryRecord {
            seed,
            aleph,
            scheme: self.plan.scheme,
            cutoffs: c,
            dt_sample: self.spec.dt_sample,
            transient_cut: self.spec.t_transient,
            times: Vec::with_capacity(n),
            n_a: Vec::with_capacity(n),
            n_b: Vec::with_capacity(n),
            alpha: Vec::with_capacity(n),
            beta: Vec::with_capacity(n),
            jumps: Vec::new(),
            warnings: TruncationWarnings::default(),
        };
        let mut raw_jumps = Vec::new();
        let first_post = ((self.spec.t_transient / self.spec.dt_sample) - 1e-9).ceil().max(0.0) as usize;
        let (mut run_a, mut run_b) = (0usize, 0usize);
        let dt_raw_sample = self.spec.dt_sample / self.time_factor;

        for k in 0..n {
            if k > 0 {
                let t0 = (k - 1) as f64 * dt_raw_sample;
                for s in 0..self.steps_per_sample {
                    step(g, &mut ws, &mut psi, t0 + s as f64 * self.dt, self.dt, &mut rng, &mut raw_jumps)?;
                }
            }
            let (na, nb) = g.populations(psi.amplitudes());
            let (a, b) = psi.amplitudes_ab();
            rec.times.push(k as f64 * self.spec.dt_sample);
            rec.n_a.push(na / aleph);
            rec.n_b.push(nb / aleph);
            rec.alpha.push(a / scale);
            rec.beta.push(b / scale);

            if k >= first_post {
                run_a = if na >= SATURATION_FRACTION * c.n_a_max as f64 { run_a + 1 } else { 0 };
                run_b = if nb >= SATURATION_FRACTION * c.n_b_max as f64 { run_b + 1 } else { 0 };
                rec.warnings.optical |= c.n_a_max > 0 && run_a >= SATURATION_RUN;
                rec.warnings.mechanical |= c.n_b_max > 0 && run_b >= SATURATION_RUN;
            }
        }
        rec.jumps = raw_jumps
            .into_iter()
            .map(|j| JumpEvent { time: j.time * self.time_factor, ..j })
            .collect();
        Ok(rec)
    }
}

/// Simulates one trajectory with the given seed.
pub fn simulate_trajectory(
    spec: &EnsembleSpec,
    plan: &ScalingPlan,
    cutoffs: FockCutoffs,
    seed: u64,
) -> Result<TrajectoryRecord> {
    EnsembleSetup::new(*spec, *plan, cutoffs)?.run(seed)
}

/// Simulates `spec.n_traj` trajectories in parallel; trajectory `i` uses
/// `trajectory_seed(master_seed, i)` and results are in index order.
pub fn simulate_ensemble(
    spec: &EnsembleSpec,
    plan: &ScalingPlan,
    cutoffs: FockCutoffs,
    master_seed: u64,
) -> Result<Vec<TrajectoryRecord>> {
    let setup = EnsembleSetup::new(*spec, *plan, cutoffs)?;
    (0..spec.n_traj as u64)
        .into_par_iter()
        .map(|i| setup.run(trajectory_seed(master_seed, i)))
        .collect()
}
