//! Fixtures shared by the benchmarks.

use lcswitch_core::hmm::{Gaussian2, HmmParams, LcState};
use lcswitch_core::model::{FockCutoffs, ScalingPlan, Scheme, SystemParams};
use lcswitch_core::qjump::EnsembleSpec;
use lcswitch_core::stats::DwellRecord;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Working point at the given aleph with the cutoffs used for desk runs.
pub fn working_plan(aleph: f64) -> (ScalingPlan, FockCutoffs) {
    (ScalingPlan::new(aleph, Scheme::TheoryA, SystemParams::WORKING_POINT), FockCutoffs::new(16, 100))
}

/// One trajectory of `t_post` time units, no transient.
pub fn short_spec(t_post: f64) -> EnsembleSpec {
    EnsembleSpec { t_transient: 0.0, t_total_post: t_post, ..EnsembleSpec::with_kappa_a(SystemParams::WORKING_POINT.kappa_a, 1) }
}

pub fn two_state_model() -> HmmParams {
    HmmParams {
        pi: [0.5, 0.5],
        a: [[0.99, 0.01], [0.02, 0.98]],
        emissions: [
            Gaussian2::new([-1.0, 0.0], [[0.3, 0.05], [0.05, 0.3]]),
            Gaussian2::new([1.0, 0.5], [[0.4, -0.05], [-0.05, 0.3]]),
        ],
    }
}

/// A sample path of `two_state_model` with unit-variance-scale noise.
pub fn observations(p: &HmmParams, n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut r = rng(seed);
    let mut s = 0usize;
    (0..n)
        .map(|_| {
            if r.random::<f64>() > p.a[s][s] {
                s = 1 - s;
            }
            let m = p.emissions[s].mean;
            let (z1, z2) = (normal(&mut r), normal(&mut r));
            [m[0] + 0.55 * z1, m[1] + 0.55 * z2]
        })
        .collect()
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    let (u, v): (f64, f64) = (1.0 - r.random::<f64>(), r.random());
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

/// Exponential dwells with rate `k`, a fifth of them censored.
pub fn dwells(k: f64, n: usize, seed: u64) -> Vec<DwellRecord> {
    let mut r = rng(seed);
    (0..n)
        .map(|i| {
            let t = -(1.0 - r.random::<f64>()).ln() / k;
            let c = -(1.0 - r.random::<f64>()).ln() / (0.25 * k);
            DwellRecord {
                trajectory: i,
                start: 0,
                state: LcState::LC1,
                duration: t.min(c),
                entry_observed: true,
                exit_observed: t <= c,
            }
        })
        .collect()
}
