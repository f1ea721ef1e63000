use num_complex::Complex64;

use super::fock::FockCutoffs;
use super::operator::OperatorMatrix;
use crate::error::{Error, Result};

/// Pure state on the truncated product basis.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    cutoffs: FockCutoffs,
    amplitudes: Vec<Complex64>,
}

impl QuantumState {
    pub fn from_amplitudes(cutoffs: FockCutoffs, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != cutoffs.dim() {
            return Err(Error::DimensionMismatch {
                expected: cutoffs.dim(),
                got: amplitudes.len(),
            });
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter("non-finite amplitude".into()));
        }
        Ok(Self { cutoffs, amplitudes })
    }

    pub fn fock(cutoffs: FockCutoffs, n_a: usize, n_b: usize) -> Self {
        assert!(n_a <= cutoffs.n_a_max && n_b <= cutoffs.n_b_max);
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); cutoffs.dim()];
        amplitudes[cutoffs.index(n_a, n_b)] = Complex64::new(1.0, 0.0);
        Self { cutoffs, amplitudes }
    }

    /// Product of coherent states `|alpha> ⊗ |beta>`, truncated and renormalized.
    pub fn coherent(cutoffs: FockCutoffs, alpha: Complex64, beta: Complex64) -> Self {
        let ca = coherent_coefficients(alpha, cutoffs.n_a_max);
        let cb = coherent_coefficients(beta, cutoffs.n_b_max);
        let mut amplitudes = Vec::with_capacity(cutoffs.dim());
        for x in &ca {
            for y in &cb {
                amplitudes.push(x * y);
            }
        }
        let mut state = Self { cutoffs, amplitudes };
        state.normalize();
        state
    }

    pub fn cutoffs(&self) -> FockCutoffs {
        self.cutoffs
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Rescales to unit norm and returns the previous norm.
    pub fn normalize(&mut self) -> f64 {
        let n = self.norm();
        if n > 0.0 {
            let inv = 1.0 / n;
            self.amplitudes.iter_mut().for_each(|z| *z *= inv);
        }
        n
    }

    /// `(<n_a>, <n_b>)` from the diagonal number operators.
    pub fn populations(&self) -> (f64, f64) {
        let mut na = 0.0;
        let mut nb = 0.0;
        for (i, z) in self.amplitudes.iter().enumerate() {
            let (a, b) = self.cutoffs.occupations(i);
            let p = z.norm_sqr();
            na += a as f64 * p;
            nb += b as f64 * p;
        }
        let n = self.norm_sqr();
        (na / n, nb / n)
    }

    /// `(<a>, <b>)` evaluated without building operator matrices.
    pub fn amplitudes_ab(&self) -> (Complex64, Complex64) {
        let c = self.cutoffs;
        let mut alpha = Complex64::new(0.0, 0.0);
        let mut beta = Complex64::new(0.0, 0.0);
        for na in 0..=c.n_a_max {
            for nb in 0..=c.n_b_max {
                let psi = self.amplitudes[c.index(na, nb)];
                if na >= 1 {
                    alpha += self.amplitudes[c.index(na - 1, nb)].conj() * psi * (na as f64).sqrt();
                }
                if nb >= 1 {
                    beta += self.amplitudes[c.index(na, nb - 1)].conj() * psi * (nb as f64).sqrt();
                }
            }
        }
        let n = self.norm_sqr();
        (alpha / n, beta / n)
    }

    /// Marginal occupation probabilities of each mode.
    pub fn marginals(&self) -> (Vec<f64>, Vec<f64>) {
        let c = self.cutoffs;
        let mut pa = vec![0.0; c.n_a_max + 1];
        let mut pb = vec![0.0; c.n_b_max + 1];
        for (i, z) in self.amplitudes.iter().enumerate() {
            let (a, b) = c.occupations(i);
            pa[a] += z.norm_sqr();
            pb[b] += z.norm_sqr();
        }
        (pa, pb)
    }
}

fn coherent_coefficients(z: Complex64, n_max: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut c = Complex64::new((-0.5 * z.norm_sqr()).exp(), 0.0);
    out.push(c);
    for n in 1..=n_max {
        c = c * z / (n as f64).sqrt();
        out.push(c);
    }
    out
}

/// `<psi|O|psi>` for a normalized state.
pub fn expectation(state: &QuantumState, op: &OperatorMatrix) -> Result<Complex64> {
    let y = op.apply(state.amplitudes())?;
    Ok(state
        .amplitudes()
        .iter()
        .zip(&y)
        .map(|(a, b)| a.conj() * b)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fock_expectations() {
        let c = FockCutoffs::new(4, 2);
        let n = OperatorMatrix::number_a(c);
        assert_eq!(expectation(&QuantumState::fock(c, 0, 0), &n).unwrap().re, 0.0);
        assert_eq!(expectation(&QuantumState::fock(c, 2, 0), &n).unwrap().re, 2.0);
    }

    #[test]
    fn coherent_amplitude_within_tail_bound() {
        let c = FockCutoffs::new(14, 1);
        let psi = QuantumState::coherent(c, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        let a = OperatorMatrix::annihilation_a(c);
        let got = expectation(&psi, &a).unwrap();
        assert!((got - Complex64::new(1.0, 0.0)).norm() < 1e-6);
        let (alpha, beta) = psi.amplitudes_ab();
        assert!((alpha - got).norm() < 1e-14);
        assert!(beta.norm() < 1e-14);
    }

    #[test]
    fn dimension_mismatch() {
        let psi = QuantumState::fock(FockCutoffs::new(2, 2), 0, 0);
        let op = OperatorMatrix::number_a(FockCutoffs::new(3, 2));
        assert!(matches!(expectation(&psi, &op), Err(Error::DimensionMismatch { .. })));
    }
}
