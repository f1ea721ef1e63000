use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default upper bound on the product-space dimension.
pub const DEFAULT_DIM_LIMIT: usize = 250_000;

/// Occupation cutoffs of the truncated two-mode Fock space.
///
/// Basis states `|n_a, n_b>` are laid out row-major with `n_b` fastest:
/// `index = n_a * (n_b_max + 1) + n_b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FockCutoffs {
    pub n_a_max: usize,
    pub n_b_max: usize,
}

impl FockCutoffs {
    pub fn new(n_a_max: usize, n_b_max: usize) -> Self {
        Self { n_a_max, n_b_max }
    }

    /// Validates against [`DEFAULT_DIM_LIMIT`]. Either cutoff may be zero to
    /// freeze a mode in its vacuum.
    pub fn validate(&self) -> Result<()> {
        self.validate_with_limit(DEFAULT_DIM_LIMIT)
    }

    pub fn validate_with_limit(&self, limit: usize) -> Result<()> {
        if self.n_a_max == 0 && self.n_b_max == 0 {
            return Err(Error::InvalidParameter(
                "at least one mode needs a non-zero cutoff".into(),
            ));
        }
        let dim = (self.n_a_max + 1).saturating_mul(self.n_b_max + 1);
        if dim > limit {
            return Err(Error::Capacity { dim, limit });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        (self.n_a_max + 1) * (self.n_b_max + 1)
    }

    #[inline]
    pub fn index(&self, n_a: usize, n_b: usize) -> usize {
        n_a * (self.n_b_max + 1) + n_b
    }

    #[inline]
    pub fn occupations(&self, index: usize) -> (usize, usize) {
        (index / (self.n_b_max + 1), index % (self.n_b_max + 1))
    }

    /// Heuristic cutoffs: four times the largest expected raw population per
    /// mode, never below `floor`.
    pub fn from_populations(max_n_a: f64, max_n_b: f64, floor: usize) -> Self {
        let pick = |n: f64| ((4.0 * n).ceil() as usize).max(floor);
        Self::new(pick(max_n_a), pick(max_n_b))
    }

    pub fn doubled(&self) -> Self {
        Self::new(2 * self.n_a_max.max(1), 2 * self.n_b_max.max(1))
    }
}

impl std::str::FromStr for FockCutoffs {
    type Err = Error;

    /// Parses `"NA,NB"`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(',').map(str::trim);
        let parse = |p: Option<&str>| -> Result<usize> {
            p.and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::InvalidParameter(format!("cutoffs must look like NA,NB: '{s}'")))
        };
        let cut = Self::new(parse(parts.next())?, parse(parts.next())?);
        if parts.next().is_some() {
            return Err(Error::InvalidParameter(format!("cutoffs must look like NA,NB: '{s}'")));
        }
        Ok(cut)
    }
}
