use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gaussian::{CovarianceKind, Gaussian2};
use super::HmmParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmControls {
    pub max_iter: usize,
    /// Stop once the relative log-likelihood gain falls below this.
    pub rel_tol: f64,
    pub covariance: CovarianceKind,
}

impl Default for EmControls {
    fn default() -> Self {
        Self { max_iter: 500, rel_tol: 1e-7, covariance: CovarianceKind::Full }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub params: HmmParams,
    /// Total log-likelihood before each update and after the last one.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl TrainedModel {
    pub fn log_likelihood(&self) -> f64 {
        *self.log_likelihood_trace.last().unwrap()
    }
}

/// Posterior quantities of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardBackward {
    pub log_likelihood: f64,
    /// `gamma[t][i] = P(s_t = i | x)`
    pub gamma: Vec<[f64; 2]>,
    /// `sum_t P(s_t = i, s_{t+1} = j | x)`
    pub xi: [[f64; 2]; 2],
}

/// Emission likelihoods rescaled per time step; returns the log scale.
fn emissions(p: &HmmParams, seq: &[[f64; 2]]) -> (Vec<[f64; 2]>, Vec<f64>) {
    seq.iter()
        .map(|x| {
            let l = [p.emissions[0].log_pdf(x), p.emissions[1].log_pdf(x)];
            let m = l[0].max(l[1]);
            ([(l[0] - m).exp(), (l[1] - m).exp()], m)
        })
        .unzip()
}

/// Scaled forward-backward recursion.
pub fn forward_backward(p: &HmmParams, seq: &[[f64; 2]]) -> ForwardBackward {
    let n = seq.len();
    if n == 0 {
        return ForwardBackward { log_likelihood: 0.0, gamma: vec![], xi: [[0.0; 2]; 2] };
    }
    let (b, shift) = emissions(p, seq);
    let a = &p.a;
    let mut alpha = vec![[0.0; 2]; n];
    let mut c = vec![0.0; n];
    let mut ll = 0.0;
    for t in 0..n {
        let prior = if t == 0 {
            p.pi
        } else {
            let f = alpha[t - 1];
            [f[0] * a[0][0] + f[1] * a[1][0], f[0] * a[0][1] + f[1] * a[1][1]]
        };
        let v = [prior[0] * b[t][0], prior[1] * b[t][1]];
        c[t] = v[0] + v[1];
        alpha[t] = [v[0] / c[t], v[1] / c[t]];
        ll += c[t].ln() + shift[t];
    }
    let mut beta = vec![[1.0; 2]; n];
    for t in (0..n - 1).rev() {
        let nb = [b[t + 1][0] * beta[t + 1][0], b[t + 1][1] * beta[t + 1][1]];
        beta[t] = [
            (a[0][0] * nb[0] + a[0][1] * nb[1]) / c[t + 1],
            (a[1][0] * nb[0] + a[1][1] * nb[1]) / c[t + 1],
        ];
    }
    let gamma: Vec<[f64; 2]> = (0..n)
        .map(|t| {
            let g = [alpha[t][0] * beta[t][0], alpha[t][1] * beta[t][1]];
            let s = g[0] + g[1];
            [g[0] / s, g[1] / s]
        })
        .collect();
    let mut xi = [[0.0; 2]; 2];
    for t in 0..n - 1 {
        for i in 0..2 {
            for j in 0..2 {
                xi[i][j] += alpha[t][i] * a[i][j] * b[t + 1][j] * beta[t + 1][j] / c[t + 1];
            }
        }
    }
    ForwardBackward { log_likelihood: ll, gamma, xi }
}

/// Summed log-likelihood of independent sequences.
pub fn log_likelihood(p: &HmmParams, sequences: &[Vec<[f64; 2]>]) -> f64 {
    sequences.par_iter().map(|s| forward_backward(p, s).log_likelihood).collect::<Vec<_>>().iter().sum()
}

fn m_step(sequences: &[Vec<[f64; 2]>], fbs: &[ForwardBackward], kind: CovarianceKind, prev: &HmmParams) -> HmmParams {
    let mut pi = [0.0; 2];
    let mut xi = [[0.0; 2]; 2];
    let mut used = 0.0;
    for fb in fbs.iter().filter(|f| !f.gamma.is_empty()) {
        pi[0] += fb.gamma[0][0];
        pi[1] += fb.gamma[0][1];
        used += 1.0;
        for i in 0..2 {
            for j in 0..2 {
                xi[i][j] += fb.xi[i][j];
            }
        }
    }
    let pi = [pi[0] / used, pi[1] / used];
    let mut a = prev.a;
    for i in 0..2 {
        let row = xi[i][0] + xi[i][1];
        if row > 0.0 {
            a[i] = [xi[i][0] / row, xi[i][1] / row];
        }
    }
    let emissions = [0, 1].map(|k| {
        let pts = sequences.iter().zip(fbs).flat_map(|(s, fb)| s.iter().zip(fb.gamma.iter().map(move |g| g[k])));
        Gaussian2::fit_weighted(pts, kind).unwrap_or(prev.emissions[k])
    });
    HmmParams { pi, a, emissions }
}

/// Joint Baum-Welch training over all sequences.
pub fn baum_welch(init: &HmmParams, sequences: &[Vec<[f64; 2]>], controls: &EmControls) -> Result<TrainedModel> {
    if sequences.iter().all(|s| s.is_empty()) {
        return Err(Error::EmptyInput("observation sequences"));
    }
    init.validate()?;
    let mut params = init.clone();
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    loop {
        let fbs: Vec<ForwardBackward> = sequences.par_iter().map(|s| forward_backward(&params, s)).collect();
        let ll: f64 = fbs.iter().map(|f| f.log_likelihood).sum();
        if !ll.is_finite() {
            return Err(Error::NonFiniteLikelihood { iteration: iterations });
        }
        if let Some(&prev) = trace.last() {
            let gain: f64 = ll - prev;
            if gain.abs() <= controls.rel_tol * prev.abs().max(1.0) {
                trace.push(ll);
                converged = true;
                break;
            }
        }
        trace.push(ll);
        if iterations >= controls.max_iter {
            break;
        }
        params = m_step(sequences, &fbs, controls.covariance, &params);
        iterations += 1;
    }
    params.canonicalize();
    Ok(TrainedModel { params, log_likelihood_trace: trace, iterations, converged })
}
