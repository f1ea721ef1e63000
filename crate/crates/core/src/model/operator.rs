use std::collections::BTreeMap;

use num_complex::Complex64;

use super::fock::FockCutoffs;
use crate::error::{Error, Result};

/// Sparse complex matrix (CSR) acting on the truncated product basis.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    cutoffs: FockCutoffs,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<Complex64>,
}

/// Accumulates `(row, col, value)` entries; duplicates are summed.
#[derive(Debug, Clone)]
pub struct OperatorBuilder {
    cutoffs: FockCutoffs,
    entries: BTreeMap<(usize, usize), Complex64>,
}

impl OperatorBuilder {
    pub fn new(cutoffs: FockCutoffs) -> Self {
        Self {
            cutoffs,
            entries: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, row: usize, col: usize, value: Complex64) -> &mut Self {
        if value != Complex64::new(0.0, 0.0) {
            *self.entries.entry((row, col)).or_default() += value;
        }
        self
    }

    /// Adds `scale * other`.
    pub fn add_operator(&mut self, other: &OperatorMatrix, scale: Complex64) -> &mut Self {
        for (r, c, v) in other.iter() {
            self.add(r, c, scale * v);
        }
        self
    }

    pub fn build(self) -> OperatorMatrix {
        let dim = self.cutoffs.dim();
        let mut row_ptr = vec![0; dim + 1];
        let mut cols = Vec::with_capacity(self.entries.len());
        let mut values = Vec::with_capacity(self.entries.len());
        for (&(r, c), &v) in &self.entries {
            if v == Complex64::new(0.0, 0.0) {
                continue;
            }
            row_ptr[r + 1] += 1;
            cols.push(c);
            values.push(v);
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        OperatorMatrix {
            cutoffs: self.cutoffs,
            row_ptr,
            cols,
            values,
        }
    }
}

impl OperatorMatrix {
    pub fn zeros(cutoffs: FockCutoffs) -> Self {
        OperatorBuilder::new(cutoffs).build()
    }

    pub fn identity(cutoffs: FockCutoffs) -> Self {
        let mut b = OperatorBuilder::new(cutoffs);
        for i in 0..cutoffs.dim() {
            b.add(i, i, Complex64::new(1.0, 0.0));
        }
        b.build()
    }

    /// Optical annihilation operator: `<n_a-1, n_b| a |n_a, n_b> = sqrt(n_a)`.
    pub fn annihilation_a(cutoffs: FockCutoffs) -> Self {
        let mut b = OperatorBuilder::new(cutoffs);
        for na in 1..=cutoffs.n_a_max {
            for nb in 0..=cutoffs.n_b_max {
                b.add(
                    cutoffs.index(na - 1, nb),
                    cutoffs.index(na, nb),
                    Complex64::new((na as f64).sqrt(), 0.0),
                );
            }
        }
        b.build()
    }

    /// Mechanical annihilation operator.
    pub fn annihilation_b(cutoffs: FockCutoffs) -> Self {
        let mut b = OperatorBuilder::new(cutoffs);
        for na in 0..=cutoffs.n_a_max {
            for nb in 1..=cutoffs.n_b_max {
                b.add(
                    cutoffs.index(na, nb - 1),
                    cutoffs.index(na, nb),
                    Complex64::new((nb as f64).sqrt(), 0.0),
                );
            }
        }
        b.build()
    }

    pub fn number_a(cutoffs: FockCutoffs) -> Self {
        let mut b = OperatorBuilder::new(cutoffs);
        for i in 0..cutoffs.dim() {
            b.add(i, i, Complex64::new(cutoffs.occupations(i).0 as f64, 0.0));
        }
        b.build()
    }

    pub fn number_b(cutoffs: FockCutoffs) -> Self {
        let mut b = OperatorBuilder::new(cutoffs);
        for i in 0..cutoffs.dim() {
            b.add(i, i, Complex64::new(cutoffs.occupations(i).1 as f64, 0.0));
        }
        b.build()
    }

    pub fn cutoffs(&self) -> FockCutoffs {
        self.cutoffs
    }

    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim()).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.values[k]))
        })
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        let span = self.row_ptr[row]..self.row_ptr[row + 1];
        self.cols[span.clone()]
            .binary_search(&col)
            .map(|k| self.values[span.start + k])
            .unwrap_or_default()
    }

    pub fn adjoint(&self) -> Self {
        let mut b = OperatorBuilder::new(self.cutoffs);
        for (r, c, v) in self.iter() {
            b.add(c, r, v.conj());
        }
        b.build()
    }

    pub fn mul(&self, other: &OperatorMatrix) -> Result<Self> {
        self.check_dim(other.dim())?;
        let mut b = OperatorBuilder::new(self.cutoffs);
        for (r, k, v) in self.iter() {
            for idx in other.row_ptr[k]..other.row_ptr[k + 1] {
                b.add(r, other.cols[idx], v * other.values[idx]);
            }
        }
        Ok(b.build())
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn sum(&self, other: &OperatorMatrix) -> Result<Self> {
        self.check_dim(other.dim())?;
        let mut b = OperatorBuilder::new(self.cutoffs);
        b.add_operator(self, Complex64::new(1.0, 0.0))
            .add_operator(other, Complex64::new(1.0, 0.0));
        Ok(b.build())
    }

    /// `y = M x`.
    #[inline]
    pub fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.dim());
        debug_assert_eq!(y.len(), self.dim());
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.cols[k]];
            }
            *out = acc;
        }
    }

    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_dim(x.len())?;
        let mut y = vec![Complex64::new(0.0, 0.0); self.dim()];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    /// Largest absolute deviation from `M = M^dagger`.
    pub fn hermiticity_defect(&self) -> f64 {
        self.iter()
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .chain(self.adjoint().iter().map(|(r, c, v)| (v - self.get(r, c)).norm()))
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    /// Copy with the diagonal removed.
    pub fn off_diagonal(&self) -> Self {
        let mut b = OperatorBuilder::new(self.cutoffs);
        for (r, c, v) in self.iter().filter(|(r, c, _)| r != c) {
            b.add(r, c, v);
        }
        b.build()
    }

    /// Gershgorin bound on the spectral radius.
    pub fn row_sum_bound(&self) -> f64 {
        (0..self.dim())
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(|k| self.values[k].norm())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annihilation_subdiagonal() {
        let c = FockCutoffs::new(4, 2);
        let a = OperatorMatrix::annihilation_a(c);
        assert_eq!(a.get(c.index(2, 1), c.index(3, 1)), Complex64::new(3f64.sqrt(), 0.0));
        assert_eq!(a.get(c.index(3, 1), c.index(2, 1)), Complex64::new(0.0, 0.0));
        let b = OperatorMatrix::annihilation_b(c);
        assert_eq!(b.get(c.index(4, 0), c.index(4, 1)), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn commutator_is_identity_in_interior() {
        for (na, nb) in [(1, 1), (5, 3), (8, 0), (0, 6)] {
            let c = FockCutoffs::new(na, nb);
            for (op, axis) in [
                (OperatorMatrix::annihilation_a(c), 0usize),
                (OperatorMatrix::annihilation_b(c), 1usize),
            ] {
                let ad = op.adjoint();
                let comm = op
                    .mul(&ad)
                    .unwrap()
                    .sum(&ad.mul(&op).unwrap().scaled(Complex64::new(-1.0, 0.0)))
                    .unwrap();
                let cap = if axis == 0 { na } else { nb };
                for i in 0..c.dim() {
                    let occ = if axis == 0 { c.occupations(i).0 } else { c.occupations(i).1 };
                    if occ < cap {
                        for j in 0..c.dim() {
                            let expect = if i == j { 1.0 } else { 0.0 };
                            assert!((comm.get(i, j) - Complex64::new(expect, 0.0)).norm() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn number_operator_matches_product() {
        let c = FockCutoffs::new(5, 4);
        let a = OperatorMatrix::annihilation_a(c);
        let n = a.adjoint().mul(&a).unwrap();
        let n_direct = OperatorMatrix::number_a(c);
        for i in 0..c.dim() {
            assert!((n.get(i, i) - n_direct.get(i, i)).norm() < 1e-12);
        }
    }
}
