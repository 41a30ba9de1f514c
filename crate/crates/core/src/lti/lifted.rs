use nalgebra::{DMatrix, DVector};

use super::TransferFunction;
use crate::error::{check_len, Error, Result};

/// Finite-time matrix representation of an LTI map over an `N`-sample task.
///
/// Built from a causal system the matrix is lower-triangular Toeplitz with
/// entry `(i, k) = h[i - k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedOperator {
    matrix: DMatrix<f64>,
    sample_period: f64,
}

impl LiftedOperator {
    pub fn from_matrix(matrix: DMatrix<f64>, sample_period: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                context: "lifted operator columns",
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("lifted operator"));
        }
        Ok(Self {
            matrix,
            sample_period,
        })
    }

    pub fn identity(n: usize, sample_period: f64) -> Self {
        Self {
            matrix: DMatrix::identity(n, n),
            sample_period,
        }
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("lifted operator input", self.size(), x.len())?;
        let v = &self.matrix * DVector::from_column_slice(x);
        Ok(v.as_slice().to_vec())
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            matrix: &self.matrix * k,
            sample_period: self.sample_period,
        }
    }

    /// Whether every diagonal carries a single value (up to `tol`).
    pub fn is_toeplitz(&self, tol: f64) -> bool {
        let n = self.size();
        (1..n).all(|i| (1..n).all(|k| (self.matrix[(i, k)] - self.matrix[(i - 1, k - 1)]).abs() <= tol))
    }

    pub fn is_lower_triangular(&self) -> bool {
        let n = self.size();
        (0..n).all(|i| (i + 1..n).all(|k| self.matrix[(i, k)] == 0.0))
    }
}

/// Lifts a causal system over `n` samples.
pub fn lift(sys: &TransferFunction, n: usize) -> Result<LiftedOperator> {
    if !sys.is_causal() {
        return Err(Error::NonCausal {
            advance: -sys.delay(),
        });
    }
    let h = sys.impulse_response(n)?;
    Ok(LiftedOperator {
        matrix: toeplitz(&h, n, 0),
        sample_period: sys.sample_period(),
    })
}

/// Lifts a possibly non-causal system with a preview window equal to the
/// task length: an advance of `k` samples fills `k` superdiagonals.
///
/// Intended for analysis and explicit learning filters such as plant inverses.
pub fn lift_noncausal(sys: &TransferFunction, n: usize) -> Result<LiftedOperator> {
    if sys.is_causal() {
        return lift(sys, n);
    }
    let advance = (-sys.delay()) as usize;
    let h = sys.rational_part().impulse_response(n + advance)?;
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("non-causal impulse response"));
    }
    Ok(LiftedOperator {
        matrix: toeplitz(&h, n, advance),
        sample_period: sys.sample_period(),
    })
}

/// Entry `(i, k) = h[i - k + advance]` when the index is non-negative.
fn toeplitz(h: &[f64], n: usize, advance: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, k| {
        let idx = i as i64 - k as i64 + advance as i64;
        if idx >= 0 {
            h[idx as usize]
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TS: f64 = 1e-3;

    #[test]
    fn gain_lifts_to_scaled_identity() {
        let l = lift(&TransferFunction::gain(3.0, TS), 3).unwrap();
        assert_eq!(l.matrix(), &(DMatrix::identity(3, 3) * 3.0));
    }

    #[test]
    fn delay_lifts_to_subdiagonal() {
        let l = lift(&TransferFunction::delay_by(1, TS), 3).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0., 0., 0., 1., 0., 0., 0., 1., 0.]);
        assert_eq!(l.matrix(), &expected);
    }

    #[test]
    fn non_causal_lift_is_rejected() {
        let adv = TransferFunction::delay_by(-1, TS);
        assert_eq!(lift(&adv, 4).unwrap_err(), Error::NonCausal { advance: 1 });
        let l = lift_noncausal(&adv, 3).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0., 1., 0., 0., 0., 1., 0., 0., 0.]);
        assert_eq!(l.matrix(), &expected);
    }

    #[test]
    fn lifted_inverse_undoes_the_plant_away_from_the_end() {
        let sys = TransferFunction::with_delay(vec![1.0, 0.4], vec![1.0, -0.6], 1, TS).unwrap();
        let n = 24;
        let j = lift(&sys, n).unwrap();
        let jinv = lift_noncausal(&sys.inverse().unwrap(), n).unwrap();
        let prod = jinv.matrix() * j.matrix();
        // the last sample is not reachable through the delay
        for i in 0..n - 1 {
            for k in 0..n {
                let expected = if i == k { 1.0 } else { 0.0 };
                assert!((prod[(i, k)] - expected).abs() < 1e-12, "({i},{k})");
            }
        }
    }
}
