//! Norm-optimal gains and convex solvers for the sparse update criterion.

mod admm;
mod constrained;
mod norm_optimal;
mod structure;
mod update;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use constrained::{solve_constrained_l1, stack_blocks, ConstrainedProblem, ConstrainedSolver};
pub use norm_optimal::norm_optimal_gains;
pub use update::{
    debias, lasso_lambda_max, soft_threshold, solve_fused_via_increments, solve_update,
    IncrementPenalty, UpdateSolver,
};

/// Explicit update `f_{j+1} = Q (f_j + L e_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitGains {
    pub l: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

impl ExplicitGains {
    pub fn new(l: DMatrix<f64>, q: DMatrix<f64>) -> Result<Self> {
        if !l.is_square() || l.shape() != q.shape() {
            return Err(Error::DimensionMismatch {
                context: "explicit gains",
                expected: l.nrows(),
                found: q.ncols(),
            });
        }
        if l.iter().chain(q.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("explicit gains"));
        }
        Ok(Self { l, q })
    }

    pub fn size(&self) -> usize {
        self.l.nrows()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Initial ADMM penalty.
    pub rho: f64,
    pub over_relaxation: f64,
    /// Bound on the scaled KKT residual required to report convergence.
    pub kkt_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50_000,
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            rho: 1.0,
            over_relaxation: 1.6,
            kkt_tol: 1e-8,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be positive".into()));
        }
        if !(positive(self.abs_tol) && positive(self.rel_tol) && positive(self.kkt_tol)) {
            return Err(Error::InvalidParameter("solver tolerances must be positive".into()));
        }
        if !positive(self.rho) {
            return Err(Error::InvalidParameter(format!("ADMM penalty must be positive, got {}", self.rho)));
        }
        if !(1.0..2.0).contains(&self.over_relaxation) {
            return Err(Error::InvalidParameter(format!(
                "over-relaxation must lie in [1, 2), got {}",
                self.over_relaxation
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub f: Vec<f64>,
    pub objective: f64,
    /// KKT residual scaled by the size of the gradient terms.
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Indices of the nonzero entries of `f` after zero snapping.
    pub support: Vec<usize>,
    /// Regularization weight the solution corresponds to.
    pub lambda: f64,
    pub diagnostics: Vec<String>,
}

impl Solution {
    pub fn cardinality(&self) -> usize {
        self.support.len()
    }
}

/// Zero-snapping threshold for a vector with the given infinity norm.
pub fn zero_threshold(inf_norm: f64) -> f64 {
    1e-9 * inf_norm.max(1.0)
}

/// Sets entries below the snapping threshold to exactly zero and returns the
/// remaining support.
pub fn snap_zeros(f: &mut [f64]) -> Vec<usize> {
    let tol = zero_threshold(f.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let mut support = Vec::new();
    for (i, v) in f.iter_mut().enumerate() {
        if v.abs() <= tol {
            *v = 0.0;
        } else {
            support.push(i);
        }
    }
    support
}

/// Number of entries above the snapping threshold.
pub fn cardinality(x: &[f64]) -> usize {
    let tol = zero_threshold(x.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    x.iter().filter(|v| v.abs() > tol).count()
}
