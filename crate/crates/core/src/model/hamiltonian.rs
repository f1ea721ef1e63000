use num_complex::Complex64;

use super::fock::FockCutoffs;
use super::operator::{OperatorBuilder, OperatorMatrix};
use super::params::SystemParams;
use crate::error::Result;

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// `H = Δa a†a + ωb b†b + g a†a (b + b†) + F (a + a†)` (ħ = 1).
pub fn build_hamiltonian(p: &SystemParams, c: FockCutoffs) -> Result<OperatorMatrix> {
    c.validate()?;
    let mut h = OperatorBuilder::new(c);
    for na in 0..=c.n_a_max {
        for nb in 0..=c.n_b_max {
            let i = c.index(na, nb);
            h.add(i, i, ONE * (p.delta_a * na as f64 + p.omega_b * nb as f64));
            if na < c.n_a_max {
                let v = ONE * (p.force * ((na + 1) as f64).sqrt());
                let j = c.index(na + 1, nb);
                h.add(j, i, v).add(i, j, v);
            }
            if nb < c.n_b_max {
                let v = ONE * (p.g * na as f64 * ((nb + 1) as f64).sqrt());
                let j = c.index(na, nb + 1);
                h.add(j, i, v).add(i, j, v);
            }
        }
    }
    Ok(h.build())
}

/// Hermitian position-damping correction `Λ_b = i (κb/4) (b†² − b²)`.
pub fn build_position_damping(p: &SystemParams, c: FockCutoffs) -> Result<OperatorMatrix> {
    c.validate()?;
    let mut l = OperatorBuilder::new(c);
    let pref = I * (p.kappa_b / 4.0);
    for na in 0..=c.n_a_max {
        for nb in 0..c.n_b_max.saturating_sub(1) {
            // <nb+2| b†² |nb> = sqrt((nb+1)(nb+2))
            let v = ((nb + 1) as f64 * (nb + 2) as f64).sqrt();
            let (lo, hi) = (c.index(na, nb), c.index(na, nb + 2));
            l.add(hi, lo, pref * v).add(lo, hi, -pref * v);
        }
    }
    Ok(l.build())
}

/// `H_eff = H + Λ_b − (i/2)(κa a†a + κb b†b)`.
pub fn build_effective_hamiltonian(p: &SystemParams, c: FockCutoffs) -> Result<OperatorMatrix> {
    let h = build_hamiltonian(p, c)?;
    let lambda = build_position_damping(p, c)?;
    let mut b = OperatorBuilder::new(c);
    b.add_operator(&h, ONE).add_operator(&lambda, ONE);
    for i in 0..c.dim() {
        let (na, nb) = c.occupations(i);
        b.add(i, i, -0.5 * I * (p.kappa_a * na as f64 + p.kappa_b * nb as f64));
    }
    Ok(b.build())
}

/// Operators shared read-only by every trajectory of an ensemble.
#[derive(Debug, Clone)]
pub struct ModelOperators {
    pub params: SystemParams,
    pub cutoffs: FockCutoffs,
    pub hamiltonian: OperatorMatrix,
    pub effective: OperatorMatrix,
    pub a: OperatorMatrix,
    pub b: OperatorMatrix,
}

impl ModelOperators {
    pub fn new(params: SystemParams, cutoffs: FockCutoffs) -> Result<Self> {
        Ok(Self {
            params,
            cutoffs,
            hamiltonian: build_hamiltonian(&params, cutoffs)?,
            effective: build_effective_hamiltonian(&params, cutoffs)?,
            a: OperatorMatrix::annihilation_a(cutoffs),
            b: OperatorMatrix::annihilation_b(cutoffs),
        })
    }
}
