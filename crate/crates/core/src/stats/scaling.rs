use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::storage::Owned;
use nalgebra::{DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmm::LcState;

/// Switching direction `from -> to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "12")]
    D12,
    #[serde(rename = "21")]
    D21,
}

impl Direction {
    pub fn from_state(self) -> LcState {
        match self {
            Self::D12 => LcState::LC1,
            Self::D21 => LcState::LC2,
        }
    }

    pub fn to_state(self) -> LcState {
        self.from_state().other()
    }

    pub fn leaving(state: LcState) -> Self {
        match state {
            LcState::LC1 => Self::D12,
            LcState::LC2 => Self::D21,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::D12 => "12",
            Self::D21 => "21",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingForm {
    Single,
    Biexp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub aleph: f64,
    pub k: f64,
    pub sigma: f64,
}

/// `k = A exp(-S aleph)`, or the sum of a phase-averaged and an amplitude
/// channel with `s_ph < s_amp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ScalingParams {
    Single { a: f64, s: f64 },
    Biexp { a_ph: f64, s_ph: f64, a_amp: f64, s_amp: f64 },
}

impl ScalingParams {
    fn terms(&self) -> Vec<(f64, f64)> {
        match *self {
            Self::Single { a, s } => vec![(a, s)],
            Self::Biexp { a_ph, s_ph, a_amp, s_amp } => vec![(a_ph, s_ph), (a_amp, s_amp)],
        }
    }

    pub fn rate(&self, aleph: f64) -> f64 {
        self.terms().iter().map(|(a, s)| a * (-s * aleph).exp()).sum()
    }

    /// `-d ln k / d aleph`.
    pub fn effective_action(&self, aleph: f64) -> f64 {
        let terms = self.terms();
        let num: f64 = terms.iter().map(|(a, s)| a * s * (-s * aleph).exp()).sum();
        num / self.rate(aleph)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub direction: Direction,
    pub form: ScalingForm,
    pub params: ScalingParams,
    /// Standard errors in the same layout as `params`.
    pub std_errors: ScalingParams,
    /// `sum ((k - model) / sigma)^2`
    pub chi2: f64,
    /// Norm of the gradient of `chi2 / 2` in the natural parameters.
    pub gradient_norm: f64,
    /// A biexponential fit collapsed onto one channel and was replaced by the
    /// single form.
    pub fallback: bool,
}

impl ScalingFit {
    pub fn rate(&self, aleph: f64) -> f64 {
        self.params.rate(aleph)
    }

    pub fn effective_action(&self, aleph: f64) -> f64 {
        self.params.effective_action(aleph)
    }
}

pub fn effective_action(fit: &ScalingFit, aleph: f64) -> f64 {
    fit.effective_action(aleph)
}

/// Weighted residuals in the parameters `(ln A_j, S_j)`.
struct Problem<'a> {
    points: &'a [ScalingPoint],
    theta: DVector<f64>,
}

impl Problem<'_> {
    fn terms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.theta.as_slice().chunks(2).map(|c| (c[0].exp(), c[1]))
    }

    fn model(&self, aleph: f64) -> f64 {
        self.terms().map(|(a, s)| a * (-s * aleph).exp()).sum()
    }

    fn cost(&self) -> f64 {
        self.residuals().map_or(f64::INFINITY, |r| r.norm_squared())
    }
}

impl LeastSquaresProblem<f64, Dyn, Dyn> for Problem<'_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, x: &DVector<f64>) {
        self.theta.copy_from(x);
    }

    fn params(&self) -> DVector<f64> {
        self.theta.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let r = DVector::from_iterator(self.points.len(), self.points.iter().map(|p| (p.k - self.model(p.aleph)) / p.sigma));
        r.iter().all(|v| v.is_finite()).then_some(r)
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        let n = self.theta.len();
        let mut j = DMatrix::zeros(self.points.len(), n);
        for (i, p) in self.points.iter().enumerate() {
            for (t, (a, s)) in self.terms().enumerate() {
                let e = a * (-s * p.aleph).exp();
                j[(i, 2 * t)] = -e / p.sigma;
                j[(i, 2 * t + 1)] = e * p.aleph / p.sigma;
            }
        }
        j.iter().all(|v| v.is_finite()).then_some(j)
    }
}

fn minimize<'a>(points: &'a [ScalingPoint], theta: Vec<f64>) -> (Problem<'a>, bool) {
    let lm = LevenbergMarquardt::new().with_patience(2000);
    let (p, report) = lm.minimize(Problem { points, theta: DVector::from_vec(theta) });
    (p, report.termination.was_successful())
}

/// Weighted linear least squares for the amplitudes at fixed exponents.
fn amplitudes(points: &[ScalingPoint], s: &[f64]) -> Vec<f64> {
    let m = points.len();
    let x = DMatrix::from_fn(m, s.len(), |i, j| (-s[j] * points[i].aleph).exp() / points[i].sigma);
    let y = DVector::from_iterator(m, points.iter().map(|p| p.k / p.sigma));
    let scale = points.iter().map(|p| p.k * (p.aleph * s[0]).exp()).fold(0.0, f64::max);
    match x.clone().svd(true, true).solve(&y, 1e-14) {
        Ok(a) => a.iter().map(|&v| if v > 0.0 && v.is_finite() { v } else { 1e-3 * scale.max(1e-300) }).collect(),
        Err(_) => vec![scale.max(1e-300); s.len()],
    }
}

fn single_starts(points: &[ScalingPoint]) -> Vec<Vec<f64>> {
    // weighted regression of ln k on aleph, weights (k / sigma)^2
    let w: Vec<f64> = points.iter().map(|p| (p.k / p.sigma).powi(2)).collect();
    let sw: f64 = w.iter().sum();
    let mx = points.iter().zip(&w).map(|(p, w)| w * p.aleph).sum::<f64>() / sw;
    let my = points.iter().zip(&w).map(|(p, w)| w * p.k.ln()).sum::<f64>() / sw;
    let sxy: f64 = points.iter().zip(&w).map(|(p, w)| w * (p.aleph - mx) * (p.k.ln() - my)).sum();
    let sxx: f64 = points.iter().zip(&w).map(|(p, w)| w * (p.aleph - mx).powi(2)).sum();
    let s = -sxy / sxx;
    [1.0, 0.5, 2.0]
        .iter()
        .map(|f| {
            let s = s * f;
            vec![amplitudes(points, &[s])[0].ln(), s]
        })
        .collect()
}

fn biexp_starts(points: &[ScalingPoint]) -> Vec<Vec<f64>> {
    const GRID: [f64; 10] = [0.01, 0.03, 0.1, 0.2, 0.3, 0.5, 0.8, 1.2, 2.0, 3.0];
    let mut out = Vec::new();
    for (i, &s1) in GRID.iter().enumerate() {
        for &s2 in &GRID[i + 1..] {
            let a = amplitudes(points, &[s1, s2]);
            out.push(vec![a[0].ln(), s1, a[1].ln(), s2]);
        }
    }
    out
}

fn best_fit<'a>(points: &'a [ScalingPoint], starts: Vec<Vec<f64>>) -> Result<Problem<'a>> {
    let fits: Vec<(Problem<'a>, bool)> = starts.into_par_iter().map(|s| minimize(points, s)).collect();
    let best_residual = fits.iter().map(|f| f.0.cost()).fold(f64::INFINITY, f64::min);
    fits.into_iter()
        .filter(|(p, ok)| *ok && p.cost().is_finite())
        .min_by(|a, b| a.0.cost().total_cmp(&b.0.cost()))
        .map(|f| f.0)
        .ok_or(Error::NonConvergence { best_residual })
}

/// Natural-parameter Jacobian of the weighted residuals, columns `(A_j, S_j)`.
fn natural_jacobian(points: &[ScalingPoint], terms: &[(f64, f64)]) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(points.len(), 2 * terms.len());
    for (i, p) in points.iter().enumerate() {
        for (t, (a, s)) in terms.iter().enumerate() {
            let e = (-s * p.aleph).exp();
            j[(i, 2 * t)] = -e / p.sigma;
            j[(i, 2 * t + 1)] = a * e * p.aleph / p.sigma;
        }
    }
    j
}

fn weighted_residuals(points: &[ScalingPoint], terms: &[(f64, f64)]) -> DVector<f64> {
    DVector::from_iterator(
        points.len(),
        points.iter().map(|p| (p.k - terms.iter().map(|(a, s)| a * (-s * p.aleph).exp()).sum::<f64>()) / p.sigma),
    )
}

/// Newton steps on `chi2 / 2` with the exact Hessian, kept while the
/// gradient shrinks.
fn polish(points: &[ScalingPoint], mut terms: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let grad_norm = |t: &[(f64, f64)]| (natural_jacobian(points, t).transpose() * weighted_residuals(points, t)).norm();
    let mut g_norm = grad_norm(&terms);
    for _ in 0..50 {
        let j = natural_jacobian(points, &terms);
        let r = weighted_residuals(points, &terms);
        let mut h = j.transpose() * &j;
        for (i, p) in points.iter().enumerate() {
            for (t, (a, s)) in terms.iter().enumerate() {
                let e = (-s * p.aleph).exp();
                // second derivatives of r_i = (k_i - model) / sigma_i
                let ri = r[i] / p.sigma;
                h[(2 * t, 2 * t + 1)] += ri * p.aleph * e;
                h[(2 * t + 1, 2 * t)] += ri * p.aleph * e;
                h[(2 * t + 1, 2 * t + 1)] -= ri * a * p.aleph * p.aleph * e;
            }
        }
        let Some(step) = h.lu().solve(&(-(j.transpose() * &r))) else { break };
        let next: Vec<(f64, f64)> = terms.iter().enumerate().map(|(t, &(a, s))| (a + step[2 * t], s + step[2 * t + 1])).collect();
        let n = grad_norm(&next);
        if !(n < g_norm) {
            break;
        }
        terms = next;
        g_norm = n;
    }
    terms
}

fn finish(direction: Direction, points: &[ScalingPoint], terms: Vec<(f64, f64)>, fallback: bool) -> ScalingFit {
    let mut terms = polish(points, terms);
    terms.sort_by(|x, y| x.1.total_cmp(&y.1));
    let params = match terms[..] {
        [(a, s)] => ScalingParams::Single { a, s },
        [(a_ph, s_ph), (a_amp, s_amp)] => ScalingParams::Biexp { a_ph, s_ph, a_amp, s_amp },
        _ => unreachable!(),
    };
    let r = weighted_residuals(points, &terms);
    let j = natural_jacobian(points, &terms);
    let gradient_norm = (j.transpose() * &r).norm();
    let se: Vec<f64> = match (j.transpose() * &j).try_inverse() {
        Some(cov) => (0..cov.nrows()).map(|i| cov[(i, i)].max(0.0).sqrt()).collect(),
        None => vec![f64::NAN; 2 * terms.len()],
    };
    let std_errors = match params {
        ScalingParams::Single { .. } => ScalingParams::Single { a: se[0], s: se[1] },
        ScalingParams::Biexp { .. } => ScalingParams::Biexp { a_ph: se[0], s_ph: se[1], a_amp: se[2], s_amp: se[3] },
    };
    ScalingFit {
        direction,
        form: if terms.len() == 1 { ScalingForm::Single } else { ScalingForm::Biexp },
        params,
        std_errors,
        chi2: r.norm_squared(),
        gradient_norm,
        fallback,
    }
}

/// Relative contribution below which a biexponential term counts as absent.
const DEGENERATE_FRACTION: f64 = 1e-6;

/// Weighted nonlinear least squares of the rate-versus-aleph law.
pub fn fit_scaling(direction: Direction, points: &[ScalingPoint], form: ScalingForm) -> Result<ScalingFit> {
    let needed = match form {
        ScalingForm::Single => 3,
        ScalingForm::Biexp => 5,
    };
    if points.len() < needed {
        return Err(Error::InvalidParameter(format!("{form:?} fit needs at least {needed} points, got {}", points.len())));
    }
    if points.iter().any(|p| !(p.k > 0.0 && p.sigma > 0.0 && p.aleph.is_finite() && p.k.is_finite())) {
        return Err(Error::InvalidParameter("rates and uncertainties must be positive".into()));
    }
    let single = || -> Result<Vec<(f64, f64)>> {
        let p = best_fit(points, single_starts(points))?;
        Ok(p.terms().collect())
    };
    match form {
        ScalingForm::Single => Ok(finish(direction, points, single()?, false)),
        ScalingForm::Biexp => {
            let fit = best_fit(points, biexp_starts(points));
            let terms: Option<Vec<(f64, f64)>> = fit.ok().map(|p| p.terms().collect());
            let degenerate = terms.as_ref().is_none_or(|t| {
                let share = |(a, s): (f64, f64)| {
                    points
                        .iter()
                        .map(|p| {
                            let total: f64 = t.iter().map(|(a, s)| a * (-s * p.aleph).exp()).sum();
                            a * (-s * p.aleph).exp() / total
                        })
                        .fold(0.0, f64::max)
                };
                let min_share = t.iter().map(|&x| share(x)).fold(f64::INFINITY, f64::min);
                min_share < DEGENERATE_FRACTION || (t[0].1 - t[1].1).abs() <= 1e-6 * t[0].1.abs().max(t[1].1.abs())
            });
            if degenerate {
                Ok(finish(direction, points, single()?, true))
            } else {
                Ok(finish(direction, points, terms.unwrap(), false))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(params: ScalingParams, alephs: impl Iterator<Item = f64>) -> Vec<ScalingPoint> {
        alephs
            .map(|aleph| {
                let k = params.rate(aleph);
                ScalingPoint { aleph, k, sigma: 0.05 * k }
            })
            .collect()
    }

    #[test]
    fn single_form_has_constant_action() {
        let p = ScalingParams::Single { a: 2.0, s: 0.4 };
        for x in [1.0, 3.0, 9.0] {
            assert!((p.effective_action(x) - 0.4).abs() < 1e-15);
        }
    }

    #[test]
    fn biexp_falls_back_on_one_channel() {
        let pts = synth(ScalingParams::Single { a: 0.5, s: 0.3 }, (2..=9).map(f64::from));
        let fit = fit_scaling(Direction::D21, &pts, ScalingForm::Biexp).unwrap();
        assert!(fit.fallback);
        assert_eq!(fit.form, ScalingForm::Single);
        let ScalingParams::Single { a, s } = fit.params else { panic!() };
        assert!((a - 0.5).abs() < 1e-8 && (s - 0.3).abs() < 1e-8);
    }

    #[test]
    fn too_few_points() {
        let pts = synth(ScalingParams::Single { a: 0.5, s: 0.3 }, (2..=5).map(f64::from));
        assert!(fit_scaling(Direction::D12, &pts[..2], ScalingForm::Single).is_err());
        assert!(fit_scaling(Direction::D12, &pts, ScalingForm::Biexp).is_err());
    }

    #[test]
    fn direction_states() {
        assert_eq!(Direction::D12.from_state(), LcState::LC1);
        assert_eq!(Direction::D21.to_state(), LcState::LC1);
        assert_eq!(Direction::leaving(LcState::LC2), Direction::D21);
        assert_eq!(serde_json::to_string(&Direction::D12).unwrap(), "\"12\"");
    }
}
