use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Smallest admissible covariance eigenvalue.
pub const COVARIANCE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceKind {
    #[default]
    Full,
    Diagonal,
}

/// Bivariate normal distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian2 {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

impl Gaussian2 {
    pub fn new(mean: [f64; 2], cov: [[f64; 2]; 2]) -> Self {
        Self { mean, cov }
    }

    /// Weighted maximum-likelihood fit; eigenvalues are clipped at
    /// [`COVARIANCE_FLOOR`].
    pub fn fit_weighted<'a>(points: impl Iterator<Item = (&'a [f64; 2], f64)> + Clone, kind: CovarianceKind) -> Option<Self> {
        let mut w = 0.0;
        let mut m = [0.0; 2];
        for (x, wi) in points.clone() {
            w += wi;
            m[0] += wi * x[0];
            m[1] += wi * x[1];
        }
        if !(w > 0.0) {
            return None;
        }
        m = [m[0] / w, m[1] / w];
        let mut c = [[0.0; 2]; 2];
        for (x, wi) in points {
            let d = [x[0] - m[0], x[1] - m[1]];
            c[0][0] += wi * d[0] * d[0];
            c[0][1] += wi * d[0] * d[1];
            c[1][1] += wi * d[1] * d[1];
        }
        c[0][0] /= w;
        c[0][1] /= w;
        c[1][1] /= w;
        c[1][0] = c[0][1];
        if kind == CovarianceKind::Diagonal {
            c[0][1] = 0.0;
            c[1][0] = 0.0;
        }
        Some(Self { mean: m, cov: floor_eigenvalues(c, COVARIANCE_FLOOR) })
    }

    pub fn determinant(&self) -> f64 {
        self.cov[0][0] * self.cov[1][1] - self.cov[0][1] * self.cov[1][0]
    }

    pub fn inverse_cov(&self) -> [[f64; 2]; 2] {
        let d = self.determinant();
        [[self.cov[1][1] / d, -self.cov[0][1] / d], [-self.cov[1][0] / d, self.cov[0][0] / d]]
    }

    pub fn log_pdf(&self, x: &[f64; 2]) -> f64 {
        let inv = self.inverse_cov();
        let d = [x[0] - self.mean[0], x[1] - self.mean[1]];
        let q = d[0] * (inv[0][0] * d[0] + inv[0][1] * d[1]) + d[1] * (inv[1][0] * d[0] + inv[1][1] * d[1]);
        -0.5 * q - 0.5 * self.determinant().ln() - (2.0 * PI).ln()
    }

    pub fn eigenvalues(&self) -> [f64; 2] {
        symmetric_eigenvalues(self.cov)
    }

    /// Image under `x -> s ∘ x + o` (componentwise scale, then shift).
    pub fn affine(&self, scale: [f64; 2], shift: [f64; 2]) -> Self {
        let mut cov = self.cov;
        for i in 0..2 {
            for j in 0..2 {
                cov[i][j] *= scale[i] * scale[j];
            }
        }
        Self {
            mean: [self.mean[0] * scale[0] + shift[0], self.mean[1] * scale[1] + shift[1]],
            cov,
        }
    }
}

fn symmetric_eigenvalues(c: [[f64; 2]; 2]) -> [f64; 2] {
    let tr = c[0][0] + c[1][1];
    let diff = 0.5 * (c[0][0] - c[1][1]);
    let r = (diff * diff + c[0][1] * c[0][1]).sqrt();
    [0.5 * tr - r, 0.5 * tr + r]
}

/// Clips the eigenvalues of a symmetric 2x2 matrix from below.
pub fn floor_eigenvalues(c: [[f64; 2]; 2], floor: f64) -> [[f64; 2]; 2] {
    let [l1, l2] = symmetric_eigenvalues(c);
    if l1 >= floor {
        return c;
    }
    let b = c[0][1];
    // unit eigenvectors (v for the larger eigenvalue, u orthogonal)
    let (v, u) = if b.abs() > 0.0 {
        let v = [b, l2 - c[0][0]];
        let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
        let v = [v[0] / n, v[1] / n];
        (v, [-v[1], v[0]])
    } else if c[0][0] >= c[1][1] {
        ([1.0, 0.0], [0.0, 1.0])
    } else {
        ([0.0, 1.0], [1.0, 0.0])
    };
    let (l1, l2) = (l1.max(floor), l2.max(floor));
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = l2 * v[i] * v[j] + l1 * u[i] * u[j];
        }
    }
    out[1][0] = out[0][1];
    out
}
