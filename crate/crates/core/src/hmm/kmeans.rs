use rand::Rng;

use super::gaussian::{CovarianceKind, Gaussian2};
use super::HmmParams;
use crate::error::{Error, Result};
use crate::qjump::trajectory_rng;

const RESTARTS: usize = 20;
const MAX_LLOYD: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansResult {
    pub centers: [[f64; 2]; 2],
    pub assignment: Vec<usize>,
    pub inertia: f64,
}

fn dist2(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn nearest(x: &[f64; 2], c: &[[f64; 2]; 2]) -> (usize, f64) {
    let (d0, d1) = (dist2(x, &c[0]), dist2(x, &c[1]));
    if d1 < d0 { (1, d1) } else { (0, d0) }
}

fn lloyd(points: &[[f64; 2]], mut centers: [[f64; 2]; 2]) -> KmeansResult {
    let mut assignment = vec![0; points.len()];
    for _ in 0..MAX_LLOYD {
        let mut changed = false;
        for (a, x) in assignment.iter_mut().zip(points) {
            let k = nearest(x, &centers).0;
            changed |= *a != k;
            *a = k;
        }
        let mut sum = [[0.0; 2]; 2];
        let mut count = [0usize; 2];
        for (&a, x) in assignment.iter().zip(points) {
            sum[a][0] += x[0];
            sum[a][1] += x[1];
            count[a] += 1;
        }
        let mut moved = false;
        for k in 0..2 {
            if count[k] > 0 {
                let c = [sum[k][0] / count[k] as f64, sum[k][1] / count[k] as f64];
                moved |= c != centers[k];
                centers[k] = c;
            }
        }
        if !changed && !moved {
            break;
        }
    }
    for (a, x) in assignment.iter_mut().zip(points) {
        *a = nearest(x, &centers).0;
    }
    let inertia = points.iter().map(|x| nearest(x, &centers).1).sum();
    KmeansResult { centers, assignment, inertia }
}

/// Two-cluster k-means with k-means++ seeding; best of 20 restarts.
pub fn kmeans(points: &[[f64; 2]], seed: u64) -> Result<KmeansResult> {
    let first = points.first().ok_or(Error::EmptyInput("observations"))?;
    if points.iter().all(|p| p == first) {
        return Err(Error::DegenerateClusters("all observations are identical".into()));
    }
    let mut rng = trajectory_rng(seed);
    let mut best: Option<KmeansResult> = None;
    for _ in 0..RESTARTS {
        let c0 = points[rng.random_range(0..points.len())];
        let weights: Vec<f64> = points.iter().map(|x| dist2(x, &c0)).collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut c1 = c0;
        for (x, w) in points.iter().zip(&weights) {
            if *w > 0.0 {
                c1 = *x;
                if u < *w {
                    break;
                }
                u -= w;
            }
        }
        let r = lloyd(points, [c0, c1]);
        if best.as_ref().is_none_or(|b| r.inertia < b.inertia) {
            best = Some(r);
        }
    }
    Ok(best.unwrap())
}

/// Initial HMM from k-means on the pooled observations: emissions from the
/// cluster members, uniform transitions, and `pi` from the clusters of the
/// first observation of each sequence.
pub fn kmeans_init(sequences: &[Vec<[f64; 2]>], kind: CovarianceKind, seed: u64) -> Result<HmmParams> {
    let pooled: Vec<[f64; 2]> = sequences.iter().flatten().copied().collect();
    let km = kmeans(&pooled, seed)?;
    let fit = |k: usize| {
        Gaussian2::fit_weighted(
            pooled.iter().zip(&km.assignment).filter(|(_, &a)| a == k).map(|(x, _)| (x, 1.0)),
            kind,
        )
        .ok_or_else(|| Error::DegenerateClusters(format!("cluster {k} is empty")))
    };
    let emissions = [fit(0)?, fit(1)?];
    let starts: Vec<usize> = sequences.iter().filter(|s| !s.is_empty()).map(|s| nearest(&s[0], &km.centers).0).collect();
    let n1 = starts.iter().filter(|&&k| k == 1).count() as f64;
    let n = starts.len() as f64;
    let mut p = HmmParams {
        pi: [1.0 - n1 / n, n1 / n],
        a: [[0.5, 0.5], [0.5, 0.5]],
        emissions,
    };
    p.canonicalize();
    Ok(p)
}
