//! Independent reference implementations shared by the integration and
//! acceptance tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use lcswitch_core::hmm::{Gaussian2, HmmParams};
use lcswitch_core::model::{FockCutoffs, Scheme, SystemParams};
use lcswitch_core::qjump::{TrajectoryRecord, TruncationWarnings};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

type CMat = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

fn lowering(n_max: usize) -> CMat {
    let d = n_max + 1;
    CMat::from_fn(d, d, |r, c| if c == r + 1 { ONE * (c as f64).sqrt() } else { ZERO })
}

fn kron(x: &CMat, y: &CMat) -> CMat {
    x.kronecker(y)
}

/// Density-matrix integrator of the two-mode master equation
/// `dρ/dt = -i[H + Λ_b, ρ] + κa D[a]ρ + κb D[b]ρ`.
pub struct DenseLindblad {
    pub a: CMat,
    pub b: CMat,
    pub hamiltonian: CMat,
    pub kappa_a: f64,
    pub kappa_b: f64,
    na_max: usize,
    nb_max: usize,
}

impl DenseLindblad {
    pub fn new(p: &SystemParams, na_max: usize, nb_max: usize) -> Self {
        let (ia, ib) = (CMat::identity(na_max + 1, na_max + 1), CMat::identity(nb_max + 1, nb_max + 1));
        let a = kron(&lowering(na_max), &ib);
        let b = kron(&ia, &lowering(nb_max));
        let (ad, bd) = (a.adjoint(), b.adjoint());
        let n_a = &ad * &a;
        let n_b = &bd * &b;
        let h = &n_a * (ONE * p.delta_a)
            + &n_b * (ONE * p.omega_b)
            + &n_a * (&b + &bd) * (ONE * p.g)
            + (&a + &ad) * (ONE * p.force);
        let lambda = (&bd * &bd - &b * &b) * (I * (p.kappa_b / 4.0));
        Self {
            hamiltonian: h + lambda,
            a,
            b,
            kappa_a: p.kappa_a,
            kappa_b: p.kappa_b,
            na_max,
            nb_max,
        }
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn dissipator(l: &CMat, rho: &CMat) -> CMat {
        let ld = l.adjoint();
        let ll = &ld * l;
        l * rho * &ld - (&ll * rho + rho * &ll) * (ONE * 0.5)
    }

    pub fn rhs(&self, rho: &CMat) -> CMat {
        let h = &self.hamiltonian;
        (h * rho - rho * h) * (-I)
            + Self::dissipator(&self.a, rho) * (ONE * self.kappa_a)
            + Self::dissipator(&self.b, rho) * (ONE * self.kappa_b)
    }

    /// Classical RK4 with a fixed step; returns `rho` at each requested time.
    pub fn evolve(&self, rho0: &CMat, times: &[f64], dt: f64) -> Vec<CMat> {
        let mut rho = rho0.clone();
        let mut t = 0.0;
        let mut out = Vec::with_capacity(times.len());
        for &target in times {
            while t < target - 1e-12 {
                let h = dt.min(target - t);
                let k1 = self.rhs(&rho);
                let k2 = self.rhs(&(&rho + &k1 * (ONE * (h / 2.0))));
                let k3 = self.rhs(&(&rho + &k2 * (ONE * (h / 2.0))));
                let k4 = self.rhs(&(&rho + &k3 * (ONE * h)));
                rho += (k1 + k2 * (ONE * 2.0) + k3 * (ONE * 2.0) + k4) * (ONE * (h / 6.0));
                t += h;
            }
            out.push(rho.clone());
        }
        out
    }

    pub fn mean_n_a(&self, rho: &CMat) -> f64 {
        (self.a.adjoint() * &self.a * rho).trace().re
    }

    pub fn mean_n_b(&self, rho: &CMat) -> f64 {
        (self.b.adjoint() * &self.b * rho).trace().re
    }

    pub fn mean_a(&self, rho: &CMat) -> Complex64 {
        (&self.a * rho).trace()
    }

    /// Marginal occupation probabilities of the optical mode.
    pub fn optical_populations(&self, rho: &CMat) -> Vec<f64> {
        let nb = self.nb_max + 1;
        (0..=self.na_max).map(|n| (0..nb).map(|m| rho[(n * nb + m, n * nb + m)].re).sum()).collect()
    }

    /// `|alpha><alpha| ⊗ |beta><beta|` built from the displacement series.
    pub fn coherent(&self, alpha: Complex64, beta: Complex64) -> CMat {
        let series = |z: Complex64, n_max: usize| {
            let mut v = Vec::with_capacity(n_max + 1);
            let mut c = ONE * (-0.5 * z.norm_sqr()).exp();
            for n in 0..=n_max {
                if n > 0 {
                    c *= z / (n as f64).sqrt();
                }
                v.push(c);
            }
            v
        };
        let (va, vb) = (series(alpha, self.na_max), series(beta, self.nb_max));
        let psi: Vec<Complex64> = va.iter().flat_map(|x| vb.iter().map(move |y| x * y)).collect();
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        let v = nalgebra::DVector::from_vec(psi) / ONE.scale(norm.sqrt());
        &v * v.adjoint()
    }
}

/// Bivariate normal log-density written out from the closed form.
pub fn gaussian_log_pdf(g: &Gaussian2, x: &[f64; 2]) -> f64 {
    let [[s11, s12], [_, s22]] = g.cov;
    let det = s11 * s22 - s12 * s12;
    let (d0, d1) = (x[0] - g.mean[0], x[1] - g.mean[1]);
    let q = (s22 * d0 * d0 - 2.0 * s12 * d0 * d1 + s11 * d1 * d1) / det;
    -0.5 * q - 0.5 * det.ln() - (2.0 * PI).ln()
}

/// Exhaustive argmax over all `2^T` state paths. Ties keep the first path
/// in lexicographic order with LC1 = 0.
pub fn brute_force_viterbi(p: &HmmParams, seq: &[[f64; 2]]) -> (Vec<usize>, f64) {
    let t = seq.len();
    let emit: Vec<[f64; 2]> =
        seq.iter().map(|x| [gaussian_log_pdf(&p.emissions[0], x), gaussian_log_pdf(&p.emissions[1], x)]).collect();
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    for code in 0u32..(1 << t) {
        let path: Vec<usize> = (0..t).rev().map(|k| ((code >> k) & 1) as usize).collect();
        let mut lp = p.pi[path[0]].ln() + emit[0][path[0]];
        for k in 1..t {
            lp += p.a[path[k - 1]][path[k]].ln() + emit[k][path[k]];
        }
        if lp > best.1 {
            best = (path, lp);
        }
    }
    best
}

/// Draws from a two-state Gaussian HMM; returns the hidden path and the
/// observations.
pub fn sample_hmm(p: &HmmParams, len: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<[f64; 2]>) {
    let mut state = usize::from(rng.random::<f64>() >= p.pi[0]);
    let mut path = Vec::with_capacity(len);
    let mut obs = Vec::with_capacity(len);
    for k in 0..len {
        if k > 0 {
            state = if rng.random::<f64>() < p.a[state][0] { 0 } else { 1 };
        }
        path.push(state);
        obs.push(sample_gaussian(&p.emissions[state], rng));
    }
    (path, obs)
}

pub fn sample_gaussian(g: &Gaussian2, rng: &mut ChaCha8Rng) -> [f64; 2] {
    let [[s11, s12], [_, s22]] = g.cov;
    let l11 = s11.sqrt();
    let l21 = s12 / l11;
    let l22 = (s22 - l21 * l21).sqrt();
    let (z0, z1) = standard_normal_pair(rng);
    [g.mean[0] + l11 * z0, g.mean[1] + l21 * z0 + l22 * z1]
}

/// Box-Muller pair.
pub fn standard_normal_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    let r = (-2.0 * u1.ln()).sqrt();
    (r * (2.0 * PI * u2).cos(), r * (2.0 * PI * u2).sin())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Record with the given optical amplitudes on a uniform grid; `n_a = |alpha|^2`
/// and the mechanical columns are zero.
pub fn synthetic_record(alpha: Vec<Complex64>, dt: f64, transient_cut: f64) -> TrajectoryRecord {
    let n = alpha.len();
    TrajectoryRecord {
        seed: 0,
        aleph: 1.0,
        scheme: Scheme::TheoryA,
        cutoffs: FockCutoffs::new(1, 0),
        dt_sample: dt,
        transient_cut,
        times: (0..n).map(|k| k as f64 * dt).collect(),
        n_a: alpha.iter().map(|z| z.norm_sqr()).collect(),
        n_b: vec![0.0; n],
        beta: vec![ZERO; n],
        alpha,
        jumps: vec![],
        warnings: TruncationWarnings::default(),
    }
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}
