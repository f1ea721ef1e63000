use num_complex::Complex64;
use rustfft::FftPlanner;

/// Interpolated upward crossings of `x` through its mean, in sample-time units.
pub fn upward_crossings(x: &[f64], dt: f64) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] < mean && w[1] >= mean)
        .map(|(k, w)| (k as f64 + (mean - w[0]) / (w[1] - w[0])) * dt)
        .collect()
}

pub fn autocorrelation(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let m = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex64> = x.iter().map(|v| Complex64::new(v - mean, 0.0)).collect();
    buf.resize(m, Complex64::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    buf.iter_mut().for_each(|z| *z = Complex64::new(z.norm_sqr(), 0.0));
    planner.plan_fft_inverse(m).process(&mut buf);
    let zero = buf[0].re;
    buf[..n].iter().map(|z| if zero > 0.0 { z.re / zero } else { 0.0 }).collect()
}

/// Lag of the highest biased-autocorrelation peak past its first zero.
pub fn autocorrelation_period(x: &[f64], dt: f64) -> Option<f64> {
    let r = autocorrelation(x);
    let half = r.len() / 2;
    let z = r.iter().position(|&v| v < 0.0)?;
    let (k, _) = r[z..half]
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i + z, *v))?;
    if k == 0 || k + 1 >= r.len() {
        return None;
    }
    let (a, b, c) = (r[k - 1], r[k], r[k + 1]);
    let denom = a - 2.0 * b + c;
    let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    Some((k as f64 + shift) * dt)
}

/// Least-squares slope of the crossings that recur at multiples of `rough`.
pub fn refine_period(crossings: &[f64], rough: f64) -> f64 {
    let Some(&c0) = crossings.first() else {
        return rough;
    };
    let pts: Vec<(f64, f64)> = crossings
        .iter()
        .filter_map(|&t| {
            let k = ((t - c0) / rough).round();
            ((t - c0 - k * rough).abs() < 0.1 * rough).then_some((k, t))
        })
        .collect();
    if pts.len() < 2 {
        return rough;
    }
    let n = pts.len() as f64;
    let mk = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mt = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mk) * (p.1 - mt)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mk).powi(2)).sum();
    if sxx > 0.0 { sxy / sxx } else { rough }
}

/// Fraction of (Hann-windowed) power within two bins of the dominant
/// frequency and its integer multiples.
pub fn spectral_purity(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 8 {
        return 0.0;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex64> = x
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / (n - 1) as f64).cos();
            Complex64::new((v - mean) * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let power: Vec<f64> = buf[..n / 2].iter().map(|z| z.norm_sqr()).collect();
    let total: f64 = power[1..].iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let k0 = (1..power.len()).max_by(|&a, &b| power[a].total_cmp(&power[b])).unwrap();
    let mut captured = 0.0;
    for (k, p) in power.iter().enumerate().skip(1) {
        let m = (k as f64 / k0 as f64).round();
        if m >= 1.0 && (k as f64 - m * k0 as f64).abs() <= 2.0 {
            captured += p;
        }
    }
    captured / total
}
