//! Adaptive Dormand-Prince 5(4) integrator with continuous output.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen automatically when `None`.
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            h_init: None,
            h_max: f64::INFINITY,
            max_steps: 50_000_000,
        }
    }
}

// Butcher tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// dense output
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Solution sampled on a caller-supplied grid.
#[derive(Debug, Clone)]
pub struct Sampled<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    pub steps: usize,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrates `y' = f(t, y)` from `t0` and reports the state at every time in
/// `grid` (ascending, each `>= t0`). Returns the final state at the last grid point.
pub fn integrate<const N: usize, F>(
    f: F,
    t0: f64,
    y0: [f64; N],
    grid: &[f64],
    tol: &Tolerances,
) -> Result<Sampled<N>>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let mut sampled = Sampled {
        times: Vec::with_capacity(grid.len()),
        states: Vec::with_capacity(grid.len()),
        steps: 0,
    };
    let Some(&t_end) = grid.last() else {
        return Ok(sampled);
    };
    if grid.windows(2).any(|w| w[1] < w[0]) || grid[0] < t0 {
        return Err(Error::InvalidParameter("output grid must be ascending and start at or after t0".into()));
    }
    let mut next_out = 0;
    while next_out < grid.len() && grid[next_out] == t0 {
        sampled.times.push(t0);
        sampled.states.push(y0);
        next_out += 1;
    }

    let scale = |a: &[f64; N], b: &[f64; N], i: usize| tol.atol + tol.rtol * a[i].abs().max(b[i].abs());

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut h = tol.h_init.unwrap_or_else(|| {
        let d0 = (0..N).map(|i| (y[i] / scale(&y, &y, i)).powi(2)).sum::<f64>().sqrt() / (N as f64).sqrt();
        let d1 = (0..N).map(|i| (k1[i] / scale(&y, &y, i)).powi(2)).sum::<f64>().sqrt() / (N as f64).sqrt();
        if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 }
    });
    h = h.min(tol.h_max).min(t_end - t0).max(1e-12);

    while next_out < grid.len() {
        if sampled.steps >= tol.max_steps {
            return Err(Error::Stiffness { t, h });
        }
        let h_floor = 16.0 * f64::EPSILON * t.abs().max(1.0);
        if h < h_floor {
            return Err(Error::Stiffness { t, h });
        }
        if t + h > t_end {
            h = t_end - t;
        }
        let k2 = f(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
        let k3 = f(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(t + C5 * h, &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(t + h, &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let y_new = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f(t + h, &y_new);

        let mut err = 0.0;
        for i in 0..N {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            err += (e / scale(&y, &y_new, i)).powi(2);
        }
        let err = (err / N as f64).sqrt();
        if !err.is_finite() {
            h *= 0.1;
            continue;
        }

        if err <= 1.0 {
            sampled.steps += 1;
            let t_new = t + h;
            while next_out < grid.len() && grid[next_out] <= t_new {
                let tq = grid[next_out];
                let theta = if h > 0.0 { (tq - t) / h } else { 1.0 };
                let mut yq = [0.0; N];
                for i in 0..N {
                    let r1 = y[i];
                    let r2 = y_new[i] - y[i];
                    let r3 = h * k1[i] - r2;
                    let r4 = r2 - h * k7[i] - r3;
                    let r5 = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                    let th1 = 1.0 - theta;
                    yq[i] = r1 + theta * (r2 + th1 * (r3 + theta * (r4 + th1 * r5)));
                }
                sampled.times.push(tq);
                sampled.states.push(if tq == t_new { y_new } else { yq });
                next_out += 1;
            }
            t = t_new;
            y = y_new;
            k1 = k7;
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * fac).min(tol.h_max);
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
        }
    }
    Ok(sampled)
}

/// Uniform grid `start, start + dt, ...` up to and including `end` (within rounding).
pub fn uniform_grid(start: f64, end: f64, dt: f64) -> Vec<f64> {
    let n = ((end - start) / dt + 1e-9).floor() as usize;
    (0..=n).map(|k| start + k as f64 * dt).collect()
}
