use crate::error::{Error, Result};

fn check(k12: f64, k21: f64) -> Result<()> {
    if k12 > 0.0 && k21 > 0.0 && k12.is_finite() && k21.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("switching rates must be positive, got ({k12}, {k21})")))
    }
}

/// Nonzero eigenvalue magnitude of the two-state rate matrix.
pub fn effective_relaxation(k12: f64, k21: f64) -> Result<f64> {
    check(k12, k21)?;
    Ok(k12 + k21)
}

/// Generator of `dp/dt = K p` for `p = (p_1, p_2)`.
pub fn rate_matrix(k12: f64, k21: f64) -> [[f64; 2]; 2] {
    [[-k12, k21], [k12, -k21]]
}

/// Null vector of the rate matrix normalized to unit sum.
pub fn stationary_occupations(k12: f64, k21: f64) -> Result<[f64; 2]> {
    let lambda = effective_relaxation(k12, k21)?;
    Ok([k21 / lambda, k12 / lambda])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_rates() {
        assert!((effective_relaxation(0.1, 0.3).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(effective_relaxation(0.2, 0.2).unwrap(), 0.4);
        assert!(effective_relaxation(0.0, 1.0).is_err());
    }

    #[test]
    fn occupations_are_stationary() {
        let (k12, k21) = (0.13, 0.41);
        let p = stationary_occupations(k12, k21).unwrap();
        let k = rate_matrix(k12, k21);
        for row in k {
            assert!((row[0] * p[0] + row[1] * p[1]).abs() < 1e-16);
        }
        assert!((p[0] / p[1] - k21 / k12).abs() < 1e-12);
        // eigenvalues of K are 0 and -(k12 + k21)
        let trace = k[0][0] + k[1][1];
        assert!((trace + effective_relaxation(k12, k21).unwrap()).abs() < 1e-15);
    }
}
