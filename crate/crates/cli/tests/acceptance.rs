//! End-to-end acceptance checks. Prints one line per criterion and exits
//! non-zero if any fails. `LCSWITCH_ACCEPTANCE=1,4,7` restricts the run.

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use lcswitch_cli::artifacts::read_json;
use lcswitch_cli::config::{aleph_dir, RunConfig};
use lcswitch_cli::pipeline::run_pipeline;
use lcswitch_cli::report::report;
use lcswitch_cli::scan::{scan, ScanGrid};
use lcswitch_cli::stages::{self, EscapeSummary, RatesFile};
use lcswitch_core::hmm::{baum_welch, kmeans_init, viterbi, CovarianceKind, EmControls, Gaussian2, HmmParams, LcState, StateSequence};
use lcswitch_core::meanfield::{default_initial_grid, extract_limit_cycles, CellLabel, ClassifyControls};
use lcswitch_core::model::{FockCutoffs, ScalingPlan, Scheme, SystemParams};
use lcswitch_core::qjump::{population_marginal, simulate_ensemble, EnsembleSpec, InitialStatePolicy, TrajectoryRecord};
use lcswitch_core::stats::{
    extract_dwells, fit_conditional_rate, fit_scaling, kaplan_meier, Direction, DwellRecord, RateControls,
    ScalingForm, ScalingParams, ScalingPoint, SurvivalCurve,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use oracles::{brute_force_viterbi, mean_se, rng, sample_hmm, DenseLindblad};
use rand::Rng;
use rand_distr::{Distribution, Exp};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

const WP: SystemParams = SystemParams::WORKING_POINT;

fn damped_cavity() -> SystemParams {
    SystemParams { g: 0.0, force: 0.0, ..WP }
}

fn short_spec(n_traj: usize, t_total: f64, dt_sample: f64, initial: InitialStatePolicy) -> EnsembleSpec {
    EnsembleSpec { n_traj, t_transient: 0.0, t_total_post: t_total, dt_sample, initial, dt_max: None }
}

fn ensemble(s: &EnsembleSpec, p: SystemParams, c: FockCutoffs, seed: u64) -> Vec<TrajectoryRecord> {
    simulate_ensemble(s, &ScalingPlan::new(1.0, Scheme::TheoryA, p), c, seed).unwrap()
}

fn column(records: &[TrajectoryRecord], k: usize, f: impl Fn(&TrajectoryRecord, usize) -> f64) -> (f64, f64) {
    mean_se(&records.iter().map(|r| f(r, k)).collect::<Vec<_>>())
}

// 1 -------------------------------------------------------------------------

fn criterion_1() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let coherent = InitialStatePolicy::Coherent { alpha: Complex64::new(2.0, 0.0), beta: Complex64::new(0.0, 0.0) };
    let fock = InitialStatePolicy::Fock { n_a: 4, n_b: 0 };
    for (name, init, cutoff) in [("coherent", coherent, 40), ("fock", fock, 6)] {
        let recs = ensemble(&short_spec(500, 20.0, 5.0, init), damped_cavity(), FockCutoffs::new(cutoff, 0), 1);
        for (k, t) in [(1, 5.0), (2, 10.0), (4, 20.0)] {
            let (m, se) = column(&recs, k, |r, k| r.n_a[k]);
            let exact = 4.0 * (-0.1f64 * t).exp();
            // a coherent state stays coherent, so its spread is round-off only
            let ok = (m - exact).abs() <= 3.0 * se + 1e-12 * exact;
            pass &= ok;
            parts.push(format!("{name} t={t}: {m:.6} vs {exact:.6} (se {se:.1e})"));
        }
    }
    outcome(pass, parts.join("; "))
}

// 2 -------------------------------------------------------------------------

fn criterion_2() -> Outcome {
    let p = SystemParams { force: 0.3, ..damped_cavity() };
    let times: Vec<f64> = (1..=10).map(|k| 4.0 * k as f64).collect();
    let me = DenseLindblad::new(&p, 6, 0);
    let mut rho0 = DMatrix::zeros(7, 7);
    rho0[(3, 3)] = Complex64::new(1.0, 0.0);
    let rhos = me.evolve(&rho0, &times, 0.01);
    let recs = ensemble(&short_spec(4000, 40.0, 4.0, InitialStatePolicy::Fock { n_a: 3, n_b: 0 }), p, FockCutoffs::new(6, 0), 3);
    let mut worst: f64 = 0.0;
    for (i, rho) in rhos.iter().enumerate() {
        let k = i + 1;
        for (exact, (m, se)) in [
            (me.mean_n_a(rho), column(&recs, k, |r, k| r.n_a[k])),
            (me.mean_a(rho).re, column(&recs, k, |r, k| r.alpha[k].re)),
            (me.mean_a(rho).im, column(&recs, k, |r, k| r.alpha[k].im)),
        ] {
            worst = worst.max((m - exact).abs() / se);
        }
    }
    outcome(worst < 3.0, format!("10 checkpoints of <n_a>, Re<a>, Im<a>; max |z| = {worst:.2}"))
}

// 3 -------------------------------------------------------------------------

fn criterion_3() -> Outcome {
    let controls = ClassifyControls::default();
    let starts = default_initial_grid();
    let cycles = extract_limit_cycles(&WP, &starts, &controls).unwrap();
    let na: Vec<f64> = cycles.iter().map(|c| c.mean_na()).collect();
    let two = cycles.len() == 2 && na[0] < na[1];
    let grid = ScanGrid::centered(&WP, 5, 0.05, 0.02);
    let cells = scan(&WP, &grid, &starts, &controls).unwrap();
    let center = &cells[12];
    let labels: Vec<String> = cells
        .chunks(5)
        .map(|row| row.iter().map(|c| c.label.as_str()).collect::<Vec<_>>().join(" "))
        .collect();
    let centered = center.delta_a == WP.delta_a && center.f_tilde == WP.force;
    outcome(
        two && centered && center.label == CellLabel::LC2,
        format!(
            "{} cycles, meanNa {:?}; center ({}, {}) = {}; grid rows by F: [{}]",
            cycles.len(),
            na,
            center.delta_a,
            center.f_tilde,
            center.label.as_str(),
            labels.join(" | ")
        ),
    )
}

// 4 -------------------------------------------------------------------------

fn criterion_4() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();

    let c = SurvivalCurve::from_samples(&[(1.0, true), (2.0, true), (2.5, false)]);
    let (s1, s2) = (c.survival_at(1.0), c.survival_at(2.0));
    let ok = (s1 - 2.0 / 3.0).abs() <= f64::EPSILON && (s2 - 1.0 / 3.0).abs() <= f64::EPSILON && c.survival_at(3.0) == s2;
    pass &= ok;
    parts.push(format!("S(1) = {s1}, S(2) = {s2}"));

    let censored = SurvivalCurve::from_samples(&[(1.0, false), (2.0, false), (4.0, false)]);
    let ok = [0.5, 1.0, 3.0, 10.0].iter().all(|&t| censored.survival_at(t) == 1.0);
    pass &= ok;
    parts.push(format!("all censored -> S = 1: {ok}"));

    let mut r = rng(44);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = r.random_range(1..300);
        let samples: Vec<(f64, bool)> = (0..n).map(|_| (r.random_range(1..50) as f64 * 0.5, true)).collect();
        let curve = SurvivalCurve::from_samples(&samples);
        for &t in &curve.times {
            let tail = samples.iter().filter(|s| s.0 > t).count() as f64 / n as f64;
            worst = worst.max((curve.survival_at(t) - tail).abs());
        }
    }
    let ok = worst <= 4.0 * f64::EPSILON;
    pass &= ok;
    parts.push(format!("no censoring vs ECDF complement over 200 sets: max |diff| = {worst:.1e}"));

    let seq = StateSequence {
        offset: 0,
        labels: [1, 1, 2, 2, 2, 1].map(|s| LcState::from_index(s - 1)).to_vec(),
        log_likelihood: 0.0,
    };
    let dwells = extract_dwells(&[seq], 1.0).unwrap();
    let incident: Vec<&DwellRecord> = dwells.iter().filter(|d| d.is_incident()).collect();
    let ok = incident.len() == 2
        && (incident[0].state, incident[0].duration, incident[0].exit_observed) == (LcState::LC2, 3.0, true)
        && (incident[1].state, incident[1].duration, incident[1].exit_observed) == (LcState::LC1, 1.0, false);
    pass &= ok;
    let km = kaplan_meier(&dwells.iter().filter(|d| d.state == LcState::LC2).copied().collect::<Vec<_>>());
    pass &= km.survival_at(3.0) == 0.0;
    parts.push(format!("dwell table [1,1,2,2,2,1]: {ok}"));
    outcome(pass, parts.join("; "))
}

// 5 -------------------------------------------------------------------------

fn censored_exponential(k: f64, n: usize, seed: u64) -> Vec<DwellRecord> {
    let mut r = rng(seed);
    let life = Exp::new(k).unwrap();
    // censoring hazard k/4 censors a fraction 1/5
    let censor = Exp::new(k / 4.0).unwrap();
    (0..n)
        .map(|i| {
            let (t, c) = (life.sample(&mut r), censor.sample(&mut r));
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

fn criterion_5() -> Outcome {
    let k = 0.05;
    let mut covered = 0;
    let mut first = None;
    let mut censored = 0usize;
    for rep in 0..100u64 {
        let d = censored_exponential(k, 5000, 1000 + rep);
        censored += d.iter().filter(|r| !r.exit_observed).count();
        let controls = RateControls { min_records: 20, n_bootstrap: 1000, confidence: 0.95, seed: rep };
        let f = fit_conditional_rate(&d, 0.0, &controls).unwrap();
        if f.ci_low <= k && k <= f.ci_high {
            covered += 1;
        }
        first.get_or_insert(f);
    }
    let f = first.unwrap();
    let rel = (f.k / k - 1.0).abs();
    outcome(
        rel < 0.03 && covered >= 90,
        format!(
            "k = {:.5} (rel. err {:.2}%), censored {:.1}%, 95% CI covers truth in {covered}/100",
            f.k,
            100.0 * rel,
            censored as f64 / 5000.0
        ),
    )
}

// 6 -------------------------------------------------------------------------

fn random_params(r: &mut rand_chacha::ChaCha8Rng) -> HmmParams {
    let mut prob = || 0.05 + 0.9 * r.random::<f64>();
    let (p0, a0, a1) = (prob(), prob(), prob());
    let mut g = || {
        let mean = [4.0 * r.random::<f64>() - 2.0, 4.0 * r.random::<f64>() - 2.0];
        let (s1, s2) = (0.2 + r.random::<f64>(), 0.2 + r.random::<f64>());
        let c = (r.random::<f64>() - 0.5) * (s1 * s2).sqrt();
        Gaussian2::new(mean, [[s1, c], [c, s2]])
    };
    HmmParams { pi: [p0, 1.0 - p0], a: [[a0, 1.0 - a0], [1.0 - a1, a1]], emissions: [g(), g()] }
}

fn criterion_6() -> Outcome {
    let mut r = rng(606);
    let mut exact = 0;
    for instance in 0..100 {
        let p = random_params(&mut r);
        let (_, obs) = sample_hmm(&p, 1 + instance % 10, &mut r);
        let (path, _) = brute_force_viterbi(&p, &obs);
        let labels: Vec<usize> = viterbi(&p, &obs).labels.iter().map(|s| s.index()).collect();
        exact += usize::from(labels == path);
    }
    let truth = HmmParams {
        pi: [0.7, 0.3],
        a: [[0.98, 0.02], [0.05, 0.95]],
        emissions: [
            Gaussian2::new([0.0, 0.0], [[0.5, 0.1], [0.1, 0.4]]),
            Gaussian2::new([2.0, 1.0], [[0.6, -0.1], [-0.1, 0.5]]),
        ],
    };
    let seqs: Vec<Vec<[f64; 2]>> = (0..20).map(|_| sample_hmm(&truth, 2000, &mut r).1).collect();
    let init = kmeans_init(&seqs, CovarianceKind::Full, 6).unwrap();
    let fit = baum_welch(&init, &seqs, &EmControls::default()).unwrap();
    let (a12, a21) = (fit.params.a[0][1], fit.params.a[1][0]);
    let bw = (a12 / 0.02 - 1.0).abs() <= 0.2 && (a21 / 0.05 - 1.0).abs() <= 0.2;
    outcome(
        exact == 100 && bw,
        format!("Viterbi = brute force in {exact}/100; Baum-Welch a12 = {a12:.4}, a21 = {a21:.4}"),
    )
}

// 7 -------------------------------------------------------------------------

fn points(truth: &ScalingParams) -> Vec<ScalingPoint> {
    (2..=9)
        .map(|x| {
            let k = truth.rate(x as f64);
            ScalingPoint { aleph: x as f64, k, sigma: 0.1 * k }
        })
        .collect()
}

fn criterion_7() -> Outcome {
    let single = fit_scaling(Direction::D12, &points(&ScalingParams::Single { a: 0.267, s: 0.178 }), ScalingForm::Single).unwrap();
    let ScalingParams::Single { a, s } = single.params else { return outcome(false, "single fit changed form") };
    let single_err = (a / 0.267 - 1.0).abs().max((s / 0.178 - 1.0).abs());

    let truth = ScalingParams::Biexp { a_ph: 0.180, s_ph: 0.303, a_amp: 2.454, s_amp: 1.057 };
    let biexp = fit_scaling(Direction::D21, &points(&truth), ScalingForm::Biexp).unwrap();
    let ScalingParams::Biexp { a_ph, s_ph, a_amp, s_amp } = biexp.params else {
        return outcome(false, "biexponential fit fell back to a single exponential");
    };
    let biexp_err = [(a_ph, 0.180), (s_ph, 0.303), (a_amp, 2.454), (s_amp, 1.057)]
        .iter()
        .map(|(g, w)| (g / w - 1.0).abs())
        .fold(0.0, f64::max);
    let seff: Vec<f64> = (0..=200).map(|i| biexp.effective_action(0.1 * i as f64)).collect();
    let decreasing = seff.windows(2).all(|w| w[1] < w[0]);
    let limit = (biexp.effective_action(200.0) - s_ph).abs();
    outcome(
        single_err < 1e-6 && biexp_err < 0.01 && decreasing && limit < 1e-9,
        format!(
            "single max rel. err {single_err:.1e}; biexp max rel. err {biexp_err:.1e}; S_eff decreasing on [0, 20]: {decreasing}; |S_eff(200) - S_ph| = {limit:.1e}"
        ),
    )
}

// 8 -------------------------------------------------------------------------

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn desk_config(root: PathBuf, transient: f64, post: f64) -> RunConfig {
    let mut c = RunConfig::from_toml(&format!(
        "alephs = [3.0]\ncutoffs = [[16, 100]]\nmaster_seed = 20240611\n\n[ensemble]\nn_traj = 2\nt_transient = {transient:?}\nt_total_post = {post:?}\n"
    ))
    .unwrap();
    c.output_root = root;
    c
}

fn criterion_8() -> Outcome {
    let mut config = desk_config(scratch("desk"), 1000.0, 50000.0);
    config.ensemble.n_traj = 8;
    let manifest = match run_pipeline(&config) {
        Ok(m) => m,
        Err(e) => return outcome(false, format!("pipeline failed: {e}")),
    };
    let root = &config.output_root;
    let dir = root.join(aleph_dir(3.0));
    let _ = report(root, &manifest);
    let mut parts = Vec::new();

    let (_, records) = stages::load_ensemble(&dir).unwrap();
    let marginal = population_marginal(&records, config.analysis.marginal_bins, None).unwrap();
    let modes = marginal.bimodality(2);
    let a = modes.is_some_and(|b| b.dip_ratio < 0.5);
    parts.push(match modes {
        Some(b) => format!("(a) n_a peaks {:.3}, {:.3}, dip ratio {:.3}", b.left_peak, b.right_peak, b.dip_ratio),
        None => "(a) unimodal".into(),
    });

    let rates: RatesFile = read_json(&dir.join(stages::RATES_FILE)).unwrap();
    let (k12, k21) = (rates.rate(Direction::D12).map(|f| f.k), rates.rate(Direction::D21).map(|f| f.k));
    let total_time = config.ensemble.n_traj as f64 * config.spec().t_total_post;
    let (b, long_enough) = match (k12, k21) {
        (Some(k12), Some(k21)) => {
            let longest = 1.0 / k12.min(k21);
            parts.push(format!(
                "(b) k12 = {:.4} kappa_a, k21 = {:.4} kappa_a, ratio {:.3}; simulated time {total_time} = {:.0} x {longest:.1}",
                k12 / WP.kappa_a,
                k21 / WP.kappa_a,
                k12 / k21,
                total_time / longest
            ));
            ((0.5..=2.0).contains(&(k12 / k21)), total_time >= 100.0 * longest)
        }
        _ => {
            parts.push(format!("(b) missing rate: {:?}", rates.directions));
            (false, false)
        }
    };

    let escape: EscapeSummary = read_json(&dir.join(stages::ESCAPE_FILE)).unwrap();
    let d12 = escape.direction(Direction::D12).unwrap();
    let c = match (d12.exit_phase, d12.uniform_reference_std) {
        (Some(s), Some(reference)) => {
            parts.push(format!(
                "(c) {} events 1->2, exit-phase circular std {:.3} vs uniform reference {:.3} (mean {:.3} rad)",
                d12.n_events, s.std, reference, s.mean_direction
            ));
            s.std < reference
        }
        _ => {
            parts.push(format!("(c) no 1->2 events: {:?}", d12.omitted));
            false
        }
    };
    outcome(a && b && c && long_enough, parts.join("; "))
}

// 9 -------------------------------------------------------------------------

fn criterion_9() -> Outcome {
    let roots = [scratch("determinism_a"), scratch("determinism_b")];
    let mut manifests = Vec::new();
    for root in &roots {
        let config = desk_config(root.clone(), 200.0, 2000.0);
        match run_pipeline(&config) {
            Ok(m) => {
                report(root, &m).unwrap();
                manifests.push(m);
            }
            Err(e) => return outcome(false, format!("pipeline failed: {e}")),
        }
    }
    let mut files: Vec<PathBuf> = manifests[0].files().map(|f| f.path.clone()).collect();
    files.extend(
        [lcswitch_cli::report::SUMMARY_FILE, lcswitch_cli::report::RATES_TABLE, lcswitch_cli::report::SCALING_CURVES]
            .map(PathBuf::from),
    );
    let differing: Vec<String> = files
        .iter()
        .filter(|f| fs::read(roots[0].join(f)).ok() != fs::read(roots[1].join(f)).ok())
        .map(|f| f.display().to_string())
        .collect();
    let same_inventory = manifests[0].stages == manifests[1].stages;
    outcome(
        differing.is_empty() && same_inventory && manifests[0].manifest_hash == manifests[1].manifest_hash,
        format!("{} files compared, {} differ {:?}; manifest hash {}", files.len(), differing.len(), differing, manifests[0].manifest_hash),
    )
}

type Check = (usize, &'static str, fn() -> Outcome);

fn main() {
    let only: Option<Vec<usize>> =
        std::env::var("LCSWITCH_ACCEPTANCE").ok().map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let criteria: [Check; 9] = [
        (1, "damped cavity", criterion_1),
        (2, "master-equation equivalence", criterion_2),
        (3, "mean-field working point", criterion_3),
        (4, "Kaplan-Meier exactness", criterion_4),
        (5, "censored MLE round trip", criterion_5),
        (6, "HMM oracles", criterion_6),
        (7, "scaling-fit round trips", criterion_7),
        (8, "desk-scale physics run", criterion_8),
        (9, "determinism", criterion_9),
    ];
    let mut failed = 0;
    for (n, name, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| outcome(false, format!("panicked: {:?}", e.downcast_ref::<String>().map(String::as_str).or(e.downcast_ref::<&str>().copied()))));
        let verdict = if result.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!result.pass);
        println!("criterion {n} {name} ... {verdict} [{:.1} s] {}", start.elapsed().as_secs_f64(), result.detail);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
