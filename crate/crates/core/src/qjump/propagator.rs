use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_effective_hamiltonian, FockCutoffs, OperatorMatrix, QuantumState, SystemParams};

/// Largest total jump probability accepted in one step.
pub const P_TOT_CAP: f64 = 0.05;
const MAX_SUBDIVISIONS: usize = 12;
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum JumpChannel {
    Optical,
    Mechanical,
}

impl JumpChannel {
    pub fn as_byte(self) -> u8 {
        match self {
            Self::Optical => 0,
            Self::Mechanical => 1,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Self::Optical),
            1 => Some(Self::Mechanical),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub channel: JumpChannel,
}

/// `-i H_eff` split into its diagonal and off-diagonal parts; shared
/// read-only by all trajectories.
#[derive(Debug, Clone)]
pub struct Generator {
    params: SystemParams,
    cutoffs: FockCutoffs,
    diag: Vec<Complex64>,
    off: OperatorMatrix,
    n_a: Vec<f64>,
    n_b: Vec<f64>,
}

impl Generator {
    pub fn new(params: SystemParams, cutoffs: FockCutoffs) -> Result<Self> {
        params.validate_closed_or_open()?;
        let heff = build_effective_hamiltonian(&params, cutoffs)?;
        let minus_i = Complex64::new(0.0, -1.0);
        let diag = heff.diagonal().into_iter().map(|h| minus_i * h).collect();
        let off = heff.off_diagonal().scaled(minus_i);
        let (n_a, n_b) = (0..cutoffs.dim())
            .map(|i| {
                let (a, b) = cutoffs.occupations(i);
                (a as f64, b as f64)
            })
            .unzip();
        Ok(Self { params, cutoffs, diag, off, n_a, n_b })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn cutoffs(&self) -> FockCutoffs {
        self.cutoffs
    }

    /// Default step: resolves the bare frequencies and keeps the explicit
    /// off-diagonal stage well inside the RK4 stability region.
    pub fn default_dt(&self) -> f64 {
        let p = &self.params;
        let rate = p
            .delta_a
            .abs()
            .max(p.omega_b)
            .max(p.kappa_a * self.cutoffs.n_a_max as f64);
        let accuracy = if rate > 0.0 { 0.05 / rate } else { f64::INFINITY };
        let rho = self.off.row_sum_bound();
        let stability = if rho > 0.0 { 1.0 / rho } else { f64::INFINITY };
        accuracy.min(stability).min(0.1)
    }

    /// Sub-step that divides `interval` into an integer number of steps no
    /// larger than `dt_max`.
    pub fn step_for_interval(&self, interval: f64, dt_max: f64) -> (f64, usize) {
        let n = (interval / dt_max).ceil().max(1.0) as usize;
        (interval / n as f64, n)
    }

    /// `(<n_a>, <n_b>)` of a normalized amplitude vector.
    pub fn populations(&self, psi: &[Complex64]) -> (f64, f64) {
        let mut na = 0.0;
        let mut nb = 0.0;
        for ((z, a), b) in psi.iter().zip(&self.n_a).zip(&self.n_b) {
            let p = z.norm_sqr();
            na += a * p;
            nb += b * p;
        }
        (na, nb)
    }
}

/// Per-trajectory scratch space for [`step`].
#[derive(Debug, Clone)]
pub struct Workspace {
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    tmp: Vec<Complex64>,
    // (dt, e^{D dt}, e^{D dt/2}) for each subdivision level in use
    factors: Vec<(f64, Vec<Complex64>, Vec<Complex64>)>,
}

impl Workspace {
    pub fn new(g: &Generator) -> Self {
        let z = vec![ZERO; g.cutoffs.dim()];
        Self {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z,
            factors: Vec::new(),
        }
    }

    fn factors(&mut self, g: &Generator, dt: f64) -> usize {
        if let Some(k) = self.factors.iter().position(|f| f.0 == dt) {
            return k;
        }
        let full = g.diag.iter().map(|d| (d * dt).exp()).collect();
        let half = g.diag.iter().map(|d| (d * (0.5 * dt)).exp()).collect();
        self.factors.push((dt, full, half));
        self.factors.len() - 1
    }
}

/// Advances `psi` by `dt` under `-i H_eff` without renormalizing.
///
/// Integrating-factor RK4: the diagonal is propagated exactly and the
/// off-diagonal coupling with classical RK4 in the interaction picture.
pub fn propagate(g: &Generator, ws: &mut Workspace, psi: &mut [Complex64], dt: f64) {
    let f = ws.factors(g, dt);
    let Workspace { k1, k2, k3, k4, tmp, factors } = ws;
    let (_, e, eh) = &factors[f];
    let n = &g.off;
    let h = dt;

    n.apply_into(psi, k1);
    for i in 0..psi.len() {
        tmp[i] = eh[i] * (psi[i] + 0.5 * h * k1[i]);
    }
    n.apply_into(tmp, k2);
    for i in 0..psi.len() {
        tmp[i] = eh[i] * psi[i] + 0.5 * h * k2[i];
    }
    n.apply_into(tmp, k3);
    for i in 0..psi.len() {
        tmp[i] = e[i] * psi[i] + h * eh[i] * k3[i];
    }
    n.apply_into(tmp, k4);
    let h6 = h / 6.0;
    for i in 0..psi.len() {
        psi[i] = e[i] * psi[i] + h6 * (e[i] * k1[i] + 2.0 * eh[i] * (k2[i] + k3[i]) + k4[i]);
    }
}

/// Applies `a` or `b` in place; the result is not normalized.
pub fn collapse(c: FockCutoffs, psi: &mut [Complex64], channel: JumpChannel) {
    match channel {
        JumpChannel::Optical => {
            for na in 1..=c.n_a_max {
                let s = (na as f64).sqrt();
                for nb in 0..=c.n_b_max {
                    psi[c.index(na - 1, nb)] = s * psi[c.index(na, nb)];
                }
            }
            for nb in 0..=c.n_b_max {
                psi[c.index(c.n_a_max, nb)] = ZERO;
            }
        }
        JumpChannel::Mechanical => {
            for na in 0..=c.n_a_max {
                for nb in 1..=c.n_b_max {
                    psi[c.index(na, nb - 1)] = (nb as f64).sqrt() * psi[c.index(na, nb)];
                }
                psi[c.index(na, c.n_b_max)] = ZERO;
            }
        }
    }
}

fn normalize(psi: &mut [Complex64]) -> f64 {
    let n = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        let inv = 1.0 / n;
        psi.iter_mut().for_each(|z| *z *= inv);
    }
    n
}

/// One first-order quantum-jump step of length `dt` starting at time `t`.
///
/// With `p_k = κ_k <n_k> dt`, a single uniform draw `μ` selects a collapse
/// at the start of the step (`μ < p_tot`, channel `a` when `μ < p_a`). The
/// state is then advanced under `H_eff` for the full step and renormalized,
/// so a jump step does not lose its share of no-jump decay. Steps whose
/// `p_tot` exceeds [`P_TOT_CAP`] are split in halves. Jumps are appended to
/// `jumps` with the step start time.
pub fn step<R: Rng + ?Sized>(
    g: &Generator,
    ws: &mut Workspace,
    psi: &mut QuantumState,
    t: f64,
    dt: f64,
    rng: &mut R,
    jumps: &mut Vec<JumpEvent>,
) -> Result<()> {
    step_level(g, ws, psi.amplitudes_mut(), t, dt, rng, jumps, 0)
}

#[allow(clippy::too_many_arguments)]
fn step_level<R: Rng + ?Sized>(
    g: &Generator,
    ws: &mut Workspace,
    psi: &mut [Complex64],
    t: f64,
    dt: f64,
    rng: &mut R,
    jumps: &mut Vec<JumpEvent>,
    depth: usize,
) -> Result<()> {
    let (na, nb) = g.populations(psi);
    let p_a = g.params.kappa_a * na * dt;
    let p_b = g.params.kappa_b * nb * dt;
    let p_tot = p_a + p_b;
    if p_tot > P_TOT_CAP {
        if depth >= MAX_SUBDIVISIONS {
            return Err(Error::StepRejected { p_tot, subdivisions: depth });
        }
        let h = 0.5 * dt;
        step_level(g, ws, psi, t, h, rng, jumps, depth + 1)?;
        return step_level(g, ws, psi, t + h, h, rng, jumps, depth + 1);
    }
    let mu: f64 = rng.random();
    if mu < p_tot {
        let channel = if mu < p_a { JumpChannel::Optical } else { JumpChannel::Mechanical };
        collapse(g.cutoffs, psi, channel);
        normalize(psi);
        jumps.push(JumpEvent { time: t, channel });
    }
    propagate(g, ws, psi, dt);
    if normalize(psi) == 0.0 {
        return Err(Error::InvalidParameter("state vanished during propagation".into()));
    }
    Ok(())
}

/// Jump probabilities `(p_a, p_b)` for a normalized state.
pub fn jump_probabilities(g: &Generator, psi: &QuantumState, dt: f64) -> (f64, f64) {
    let (na, nb) = g.populations(psi.amplitudes());
    (g.params.kappa_a * na * dt, g.params.kappa_b * nb * dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn damped(kappa_b: f64) -> SystemParams {
        SystemParams { g: 0.0, force: 0.0, kappa_b, ..SystemParams::WORKING_POINT }
    }

    #[test]
    fn first_order_probabilities() {
        let c = FockCutoffs::new(4, 1);
        let p = SystemParams { kappa_b: 0.0, ..damped(0.0) };
        let g = Generator::new(p, c).unwrap();
        let psi = QuantumState::fock(c, 2, 0);
        let (pa, pb) = jump_probabilities(&g, &psi, 0.01);
        assert!((pa - 0.002).abs() < 1e-15);
        assert_eq!(pb, 0.0);
    }

    #[test]
    fn collapse_of_fock_state() {
        let c = FockCutoffs::new(4, 2);
        let mut psi = QuantumState::fock(c, 2, 0);
        collapse(c, psi.amplitudes_mut(), JumpChannel::Optical);
        psi.normalize();
        assert_eq!(psi, QuantumState::fock(c, 1, 0));
        let mut psi = QuantumState::fock(c, 3, 2);
        collapse(c, psi.amplitudes_mut(), JumpChannel::Mechanical);
        psi.normalize();
        assert_eq!(psi, QuantumState::fock(c, 3, 1));
    }

    #[test]
    fn diagonal_evolution_is_exact() {
        let c = FockCutoffs::new(6, 3);
        let g = Generator::new(damped(0.0), c).unwrap();
        let mut ws = Workspace::new(&g);
        let mut psi = QuantumState::fock(c, 3, 2);
        let amp = psi.amplitudes_mut();
        propagate(&g, &mut ws, amp, 0.7);
        // exp(-i(Δa·3 + ωb·2)t − κa·3·t/2)
        let expect = (Complex64::new(-0.05 * 3.0, -(-0.7 * 3.0 + 2.0)) * 0.7).exp();
        assert!((amp[c.index(3, 2)] - expect).norm() < 1e-14);
    }

    #[test]
    fn unitary_without_dissipation() {
        let c = FockCutoffs::new(8, 6);
        let p = SystemParams::WORKING_POINT.without_dissipation();
        let g = Generator::new(p, c).unwrap();
        let mut ws = Workspace::new(&g);
        let mut psi = QuantumState::coherent(c, Complex64::new(1.0, 0.5), Complex64::new(0.5, 0.0));
        // the raw norm defect of RK4 scales as dt^5 per unit time
        let dt = g.default_dt() / 8.0;
        let steps = (10.0 / dt).ceil() as usize;
        let t_total = steps as f64 * dt;
        for _ in 0..steps {
            propagate(&g, &mut ws, psi.amplitudes_mut(), dt);
        }
        let drift = (psi.norm_sqr() - 1.0).abs();
        assert!(drift / t_total < 1e-10, "drift {drift}");
    }

    #[test]
    fn no_jumps_without_dissipation() {
        let c = FockCutoffs::new(6, 4);
        let g = Generator::new(SystemParams::WORKING_POINT.without_dissipation(), c).unwrap();
        let mut ws = Workspace::new(&g);
        let mut psi = QuantumState::coherent(c, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut jumps = Vec::new();
        for k in 0..2000 {
            step(&g, &mut ws, &mut psi, k as f64 * 0.01, 0.01, &mut rng, &mut jumps).unwrap();
        }
        assert!(jumps.is_empty());
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oversized_step_is_subdivided() {
        let c = FockCutoffs::new(10, 0);
        let g = Generator::new(SystemParams { kappa_b: 0.0, ..damped(0.0) }, c).unwrap();
        let mut ws = Workspace::new(&g);
        let mut psi = QuantumState::fock(c, 10, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut jumps = Vec::new();
        // p_tot = 0.1 * 10 * 0.2 = 0.2 > cap
        step(&g, &mut ws, &mut psi, 0.0, 0.2, &mut rng, &mut jumps).unwrap();
        assert!(jumps.iter().all(|j| j.time <= 0.2 + 1e-15));
        assert!(ws.factors.iter().any(|f| f.0 < 0.2));
    }
}
