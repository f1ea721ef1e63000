use lcswitch_core::hmm::LcState;
use lcswitch_core::stats::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

fn incident(duration: f64, exit_observed: bool) -> DwellRecord {
    DwellRecord { trajectory: 0, start: 0, state: LcState::LC1, duration, entry_observed: true, exit_observed }
}

fn exp_samples(rate: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Exp::new(rate).unwrap();
    (0..n).map(|_| d.sample(&mut rng)).collect()
}

/// Two-component mixture drawn with common random numbers across weights.
fn mixture(weight_fast: f64, n: usize, seed: u64) -> Vec<(f64, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let e: f64 = -rng.random::<f64>().ln();
            (if u < weight_fast { e / 10.0 } else { e / 0.1 }, true)
        })
        .collect()
}

#[test]
fn exponential_rate_recovered() {
    let d: Vec<_> = exp_samples(0.05, 5000, 11).into_iter().map(|t| incident(t, true)).collect();
    let f = fit_conditional_rate(&d, 0.0, &RateControls::default()).unwrap();
    assert!((f.k / 0.05 - 1.0).abs() < 0.03, "k = {}", f.k);
    assert!(f.ci_low < 0.05 && 0.05 < f.ci_high);
    assert_eq!(f.n_events, 5000);
}

#[test]
fn conditional_rate_ignores_records_below_threshold() {
    let mut d: Vec<_> = exp_samples(0.2, 400, 5).into_iter().map(|t| incident(t + 3.0, t > 1.0)).collect();
    let base = fit_conditional_rate(&d, 3.0, &RateControls::default()).unwrap();
    d.extend((0..50).map(|k| incident(0.05 * k as f64, k % 2 == 0)));
    assert_eq!(fit_conditional_rate(&d, 3.0, &RateControls::default()).unwrap(), base);
}

#[test]
fn pure_exponential_accepts_first_threshold() {
    for seed in 0..5 {
        let s: Vec<_> = exp_samples(0.1, 5000, seed).into_iter().map(|t| (t, true)).collect();
        let sel = select_t0(&SurvivalCurve::from_samples(&s), &ThresholdControls::default()).unwrap();
        assert_eq!(sel.t0, 0.0, "seed {seed}: {:?}", sel.candidates);
    }
}

#[test]
fn threshold_excludes_flicker() {
    let s = mixture(0.5, 20_000, 1);
    let sel = select_t0(&SurvivalCurve::from_samples(&s), &ThresholdControls::default()).unwrap();
    // remaining fraction of the fast component beyond t0
    assert!((-10.0 * sel.t0).exp() <= 0.05, "t0 = {}", sel.t0);
}

#[test]
fn threshold_grows_with_flicker_weight() {
    let mut last = 0.0;
    for w in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let s = mixture(w, 20_000, 2);
        let t0 = select_t0(&SurvivalCurve::from_samples(&s), &ThresholdControls::default()).unwrap().t0;
        assert!(t0 >= last, "weight {w}: t0 {t0} < {last}");
        last = t0;
    }
}

#[test]
fn kaplan_meier_with_censoring() {
    let c = SurvivalCurve::from_samples(&[(1.0, true), (2.0, true), (2.5, false)]);
    assert!((c.survival_at(1.0) - 2.0 / 3.0).abs() < 1e-15);
    assert!((c.survival_at(2.0) - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn single_scaling_roundtrip() {
    let truth = ScalingParams::Single { a: 0.267, s: 0.178 };
    let pts: Vec<_> = (2..=9)
        .map(|x| {
            let k = truth.rate(x as f64);
            ScalingPoint { aleph: x as f64, k, sigma: 0.1 * k }
        })
        .collect();
    let fit = fit_scaling(Direction::D12, &pts, ScalingForm::Single).unwrap();
    let ScalingParams::Single { a, s } = fit.params else { panic!("{fit:?}") };
    assert!((a - 0.267).abs() < 1e-6 && (s - 0.178).abs() < 1e-6, "{a} {s}");
    assert!(fit.gradient_norm < 1e-8);
}

fn paper_biexp() -> ScalingParams {
    ScalingParams::Biexp { a_ph: 0.180, s_ph: 0.303, a_amp: 2.454, s_amp: 1.057 }
}

#[test]
fn biexp_scaling_roundtrip() {
    let pts: Vec<_> = (2..=9)
        .map(|x| {
            let k = paper_biexp().rate(x as f64);
            ScalingPoint { aleph: x as f64, k, sigma: 0.1 * k }
        })
        .collect();
    let fit = fit_scaling(Direction::D21, &pts, ScalingForm::Biexp).unwrap();
    assert!(!fit.fallback);
    let ScalingParams::Biexp { a_ph, s_ph, a_amp, s_amp } = fit.params else { panic!("{fit:?}") };
    for (got, want) in [(a_ph, 0.180), (s_ph, 0.303), (a_amp, 2.454), (s_amp, 1.057)] {
        assert!((got / want - 1.0).abs() < 0.01, "{got} vs {want}");
    }
}

#[test]
fn effective_action_matches_finite_difference() {
    let p = paper_biexp();
    let h = 1e-4;
    let fd = -((p.rate(3.0 + h)).ln() - (p.rate(3.0 - h)).ln()) / (2.0 * h);
    assert!((p.effective_action(3.0) / fd - 1.0).abs() < 1e-6);
}

#[test]
fn effective_action_tends_to_phase_channel() {
    let p = paper_biexp();
    let mut prev = f64::INFINITY;
    for k in 0..=60 {
        let s = p.effective_action(0.5 * k as f64);
        assert!(s < prev, "aleph {}", 0.5 * k as f64);
        prev = s;
    }
    assert!((p.effective_action(100.0) - 0.303).abs() < 1e-9);
}

#[test]
fn noisy_fit_is_stationary() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pts: Vec<_> = (2..=9)
        .map(|x| {
            let k = paper_biexp().rate(x as f64);
            let sigma = 0.05 * k;
            let noise: f64 = rng.random_range(-1.0..1.0);
            ScalingPoint { aleph: x as f64, k: k + noise * sigma, sigma }
        })
        .collect();
    for form in [ScalingForm::Single, ScalingForm::Biexp] {
        let fit = fit_scaling(Direction::D21, &pts, form).unwrap();
        assert!(fit.gradient_norm < 1e-8, "{form:?}: {}", fit.gradient_norm);
    }
}

proptest! {
    #[test]
    fn kaplan_meier_without_censoring_is_ecdf_complement(durations in prop::collection::vec(1u32..40, 1..200)) {
        let samples: Vec<(f64, bool)> = durations.iter().map(|&d| (d as f64, true)).collect();
        let c = SurvivalCurve::from_samples(&samples);
        let n = samples.len() as f64;
        for &t in &c.times {
            let tail = samples.iter().filter(|s| s.0 > t).count() as f64 / n;
            prop_assert!((c.survival_at(t) - tail).abs() < 1e-12);
        }
    }

    #[test]
    fn survival_is_monotone(samples in prop::collection::vec((1u32..40, any::<bool>()), 1..200)) {
        let s: Vec<(f64, bool)> = samples.iter().map(|&(d, o)| (d as f64, o)).collect();
        let c = SurvivalCurve::from_samples(&s);
        prop_assert!(c.survival.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(c.survival.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn biexp_action_decreases(a1 in 0.01f64..5.0, s1 in 0.05f64..1.0, a2 in 0.01f64..5.0, ds in 0.05f64..2.0, x in 0.0f64..20.0) {
        let p = ScalingParams::Biexp { a_ph: a1, s_ph: s1, a_amp: a2, s_amp: s1 + ds };
        prop_assert!(p.effective_action(x + 0.5) < p.effective_action(x));
    }

    #[test]
    fn stationary_ratio(k12 in 1e-3f64..10.0, k21 in 1e-3f64..10.0) {
        let p = stationary_occupations(k12, k21).unwrap();
        prop_assert!((p[0] / p[1] - k21 / k12).abs() < 1e-9 * (k21 / k12));
    }
}
