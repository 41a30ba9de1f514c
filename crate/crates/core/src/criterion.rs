//! The general ILC update criterion
//!
//! ```text
//! V(f) = 1/2 |W_e (e_j - J (f - f_j))|^2 + 1/2 |W_f f|^2
//!      + 1/2 |W_df (f - f_j)|^2 + lambda |D f|_1
//! ```
//!
//! together with the penalty matrices `D` of the lasso, fused lasso and
//! sparse fused lasso variants.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_finite, check_len, Error, Result};
use crate::lti::LiftedOperator;

/// A weighting matrix `W` acting on length-`N` signals.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSpec {
    Zero,
    ScaledIdentity(f64),
    Diagonal(Vec<f64>),
    Full(DMatrix<f64>),
}

impl WeightSpec {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            WeightSpec::Zero => Ok(()),
            WeightSpec::ScaledIdentity(s) => {
                if s.is_finite() && *s >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "weight scale must be finite and non-negative, got {s}"
                    )))
                }
            }
            WeightSpec::Diagonal(d) => {
                check_len("diagonal weight", n, d.len())?;
                check_finite(d, "diagonal weight")?;
                if d.iter().any(|v| *v < 0.0) {
                    return Err(Error::InvalidParameter("diagonal weights must be non-negative".into()));
                }
                Ok(())
            }
            WeightSpec::Full(m) => {
                check_len("full weight columns", n, m.ncols())?;
                if m.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("full weight"));
                }
                Ok(())
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            WeightSpec::Zero => true,
            WeightSpec::ScaledIdentity(s) => *s == 0.0,
            WeightSpec::Diagonal(d) => d.iter().all(|v| *v == 0.0),
            WeightSpec::Full(m) => m.iter().all(|v| *v == 0.0),
        }
    }

    /// `W x`.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            WeightSpec::Zero => DVector::zeros(x.len()),
            WeightSpec::ScaledIdentity(s) => x * *s,
            WeightSpec::Diagonal(d) => DVector::from_iterator(x.len(), x.iter().zip(d).map(|(a, b)| a * b)),
            WeightSpec::Full(m) => m * x,
        }
    }

    /// Dense `W`, with `n` columns.
    pub fn matrix(&self, n: usize) -> DMatrix<f64> {
        match self {
            WeightSpec::Zero => DMatrix::zeros(n, n),
            WeightSpec::ScaledIdentity(s) => DMatrix::identity(n, n) * *s,
            WeightSpec::Diagonal(d) => DMatrix::from_diagonal(&DVector::from_column_slice(d)),
            WeightSpec::Full(m) => m.clone(),
        }
    }

    /// `W^T W`.
    pub fn gram(&self, n: usize) -> DMatrix<f64> {
        match self {
            WeightSpec::Zero => DMatrix::zeros(n, n),
            WeightSpec::ScaledIdentity(s) => DMatrix::identity(n, n) * (s * s),
            WeightSpec::Diagonal(d) => DMatrix::from_diagonal(&DVector::from_iterator(n, d.iter().map(|v| v * v))),
            WeightSpec::Full(m) => m.transpose() * m,
        }
    }

    /// Whether `W^T W` is positive definite.
    pub fn is_positive_definite(&self, n: usize) -> bool {
        match self {
            WeightSpec::Zero => false,
            WeightSpec::ScaledIdentity(s) => *s > 0.0,
            WeightSpec::Diagonal(d) => d.iter().all(|v| *v > 0.0),
            WeightSpec::Full(m) => full_column_rank(m) && m.ncols() == n,
        }
    }
}

/// Structure of the penalty matrix `D`.
#[derive(Debug, Clone, PartialEq)]
pub enum PenaltyKind {
    Identity,
    /// First differences, `(N-1) x N`.
    Fused,
    /// `[fusion_weight * D_f ; I]`, `(2N-1) x N`.
    SparseFused { fusion_weight: f64 },
    Custom(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizerSpec {
    pub lambda: f64,
    pub kind: PenaltyKind,
}

impl RegularizerSpec {
    pub fn none() -> Self {
        Self {
            lambda: 0.0,
            kind: PenaltyKind::Identity,
        }
    }

    pub fn new(lambda: f64, kind: PenaltyKind) -> Self {
        Self { lambda, kind }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be finite and non-negative, got {}",
                self.lambda
            )));
        }
        match &self.kind {
            PenaltyKind::Identity => Ok(()),
            PenaltyKind::Fused => {
                if n < 2 {
                    Err(Error::InvalidParameter("fused penalty needs N >= 2".into()))
                } else {
                    Ok(())
                }
            }
            PenaltyKind::SparseFused { fusion_weight } => {
                if n < 2 {
                    return Err(Error::InvalidParameter("sparse fused penalty needs N >= 2".into()));
                }
                if fusion_weight.is_finite() && *fusion_weight >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "fusion weight must be finite and non-negative, got {fusion_weight}"
                    )))
                }
            }
            PenaltyKind::Custom(d) => {
                check_len("penalty matrix columns", n, d.ncols())?;
                if d.iter().any(|v| !v.is_finite()) {
                    Err(Error::NonFinite("penalty matrix"))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn matrix(&self, n: usize) -> Result<DMatrix<f64>> {
        match &self.kind {
            PenaltyKind::Identity => Ok(DMatrix::identity(n, n)),
            PenaltyKind::Fused => build_fused_difference(n),
            PenaltyKind::SparseFused { fusion_weight } => build_sparse_fused(n, *fusion_weight),
            PenaltyKind::Custom(d) => Ok(d.clone()),
        }
    }
}

/// Rows `[-1, +1]` on adjacent columns.
pub fn build_fused_difference(n: usize) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "difference matrix needs N >= 2, got {n}"
        )));
    }
    let mut d = DMatrix::zeros(n - 1, n);
    for k in 0..n - 1 {
        d[(k, k)] = -1.0;
        d[(k, k + 1)] = 1.0;
    }
    Ok(d)
}

/// Square lower-bidiagonal map from a signal to its increments; the first
/// increment is the first sample itself. Its inverse is the cumulative sum.
pub fn build_incremental_map(n: usize) -> DMatrix<f64> {
    let mut d = DMatrix::identity(n, n);
    for k in 1..n {
        d[(k, k - 1)] = -1.0;
    }
    d
}

/// Lower-triangular all-ones matrix, the inverse of [`build_incremental_map`].
pub fn cumulative_sum_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, k| if i >= k { 1.0 } else { 0.0 })
}

pub fn build_sparse_fused(n: usize, fusion_weight: f64) -> Result<DMatrix<f64>> {
    if !(fusion_weight.is_finite() && fusion_weight >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "fusion weight must be finite and non-negative, got {fusion_weight}"
        )));
    }
    let diff = build_fused_difference(n)? * fusion_weight;
    let mut d = DMatrix::zeros(2 * n - 1, n);
    d.view_mut((0, 0), (n - 1, n)).copy_from(&diff);
    d.view_mut((n - 1, 0), (n, n)).copy_from(&DMatrix::<f64>::identity(n, n));
    Ok(d)
}

/// Gram forms `W^T W` of the three weights.
#[derive(Debug, Clone)]
pub struct Grams {
    pub error: DMatrix<f64>,
    pub command: DMatrix<f64>,
    pub change: DMatrix<f64>,
}

/// Whether the criterion has a unique minimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Uniqueness {
    Unique,
    PossiblyNonUnique,
}

#[derive(Debug, Clone)]
pub struct CriterionSpec {
    pub w_error: WeightSpec,
    pub w_command: WeightSpec,
    pub w_change: WeightSpec,
    pub regularizer: RegularizerSpec,
    n: usize,
    grams: OnceLock<Grams>,
}

impl CriterionSpec {
    pub fn new(
        n: usize,
        w_error: WeightSpec,
        w_command: WeightSpec,
        w_change: WeightSpec,
        regularizer: RegularizerSpec,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("task length must be positive".into()));
        }
        w_error.validate(n)?;
        w_command.validate(n)?;
        w_change.validate(n)?;
        regularizer.validate(n)?;
        Ok(Self {
            w_error,
            w_command,
            w_change,
            regularizer,
            n,
            grams: OnceLock::new(),
        })
    }

    /// `W_e = I`, all other weights zero, penalty `lambda |D f|_1`.
    pub fn lasso(n: usize, lambda: f64, kind: PenaltyKind) -> Result<Self> {
        Self::new(
            n,
            WeightSpec::ScaledIdentity(1.0),
            WeightSpec::Zero,
            WeightSpec::Zero,
            RegularizerSpec::new(lambda, kind),
        )
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn lambda(&self) -> f64 {
        self.regularizer.lambda
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(
            self.n,
            self.w_error.clone(),
            self.w_command.clone(),
            self.w_change.clone(),
            RegularizerSpec::new(lambda, self.regularizer.kind.clone()),
        )
    }

    pub fn penalty_matrix(&self) -> DMatrix<f64> {
        self.regularizer
            .matrix(self.n)
            .expect("regularizer validated at construction")
    }

    pub fn grams(&self) -> &Grams {
        self.grams.get_or_init(|| Grams {
            error: self.w_error.gram(self.n),
            command: self.w_command.gram(self.n),
            change: self.w_change.gram(self.n),
        })
    }

    /// Checks whether the smooth part is strictly convex or the penalty
    /// pins down the minimizer.
    pub fn uniqueness(&self, j: &LiftedOperator) -> Uniqueness {
        let error_term = self.w_error.is_positive_definite(self.n) && full_column_rank(j.matrix());
        let command_term = self.w_command.is_positive_definite(self.n);
        let change_term = self.w_change.is_positive_definite(self.n);
        let penalty_term = self.lambda() > 0.0 && full_column_rank(&self.penalty_matrix());
        if error_term || command_term || change_term || penalty_term {
            Uniqueness::Unique
        } else {
            Uniqueness::PossiblyNonUnique
        }
    }

    pub fn penalty_value(&self, f: &[f64]) -> f64 {
        if self.lambda() == 0.0 {
            return 0.0;
        }
        let d = self.penalty_matrix();
        self.lambda() * (d * DVector::from_column_slice(f)).lp_norm(1)
    }
}

/// Value of the criterion at `candidate` given the measured trial `(e_j, f_j)`.
pub fn evaluate_criterion(
    spec: &CriterionSpec,
    e_j: &[f64],
    f_j: &[f64],
    candidate: &[f64],
    j: &LiftedOperator,
) -> Result<f64> {
    let n = spec.len();
    check_len("criterion error signal", n, e_j.len())?;
    check_len("criterion command signal", n, f_j.len())?;
    check_len("criterion candidate", n, candidate.len())?;
    check_len("criterion lifted system", n, j.size())?;
    let e = DVector::from_column_slice(e_j);
    let f_prev = DVector::from_column_slice(f_j);
    let f = DVector::from_column_slice(candidate);
    let step = &f - &f_prev;
    let predicted = &e - j.matrix() * &step;
    let value = 0.5 * spec.w_error.apply(&predicted).norm_squared()
        + 0.5 * spec.w_command.apply(&f).norm_squared()
        + 0.5 * spec.w_change.apply(&step).norm_squared()
        + spec.penalty_value(candidate);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite("criterion value"))
    }
}

pub(crate) fn full_column_rank(m: &DMatrix<f64>) -> bool {
    if m.nrows() < m.ncols() {
        return false;
    }
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    max > 0.0 && min > max * m.ncols().max(m.nrows()) as f64 * f64::EPSILON
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fused_difference_rows() {
        let d = build_fused_difference(3).unwrap();
        assert_eq!(d, DMatrix::from_row_slice(2, 3, &[-1., 1., 0., 0., -1., 1.]));
        let c = DVector::from_element(3, 2.5);
        assert_eq!(d * c, DVector::zeros(2));
        let x = DVector::from_column_slice(&[0., 1., 1., 4.]);
        let d4 = build_fused_difference(4).unwrap();
        assert_eq!((d4 * x).as_slice(), &[1., 0., 3.]);
        assert!(build_fused_difference(1).is_err());
    }

    #[test]
    fn incremental_map_and_inverse() {
        assert_eq!(
            build_incremental_map(2),
            DMatrix::from_row_slice(2, 2, &[1., 0., -1., 1.])
        );
        let step = cumulative_sum_matrix(3) * DVector::from_column_slice(&[1., 0., 0.]);
        assert_eq!(step.as_slice(), &[1., 1., 1.]);
        let x = DVector::from_column_slice(&[0.3, -1.2, 4.0, 0.0, 2.5, -0.7, 1.1, 9.0]);
        let back = build_incremental_map(8) * (cumulative_sum_matrix(8) * &x);
        assert!((back - x).amax() < 1e-14);
    }

    #[test]
    fn incremental_map_inverse_is_exact_up_to_1024() {
        for n in [1usize, 2, 17, 256, 1024] {
            let prod = build_incremental_map(n) * cumulative_sum_matrix(n);
            assert_eq!(prod, DMatrix::identity(n, n), "n = {n}");
        }
    }

    #[test]
    fn sparse_fused_layout() {
        let d = build_sparse_fused(2, 1.0).unwrap();
        assert_eq!(d, DMatrix::from_row_slice(3, 2, &[-1., 1., 1., 0., 0., 1.]));
        let d0 = build_sparse_fused(4, 0.0).unwrap();
        assert!(d0.rows(0, 3).iter().all(|v| *v == 0.0));
        let f = DVector::from_column_slice(&[1.0, 1.0]);
        assert_eq!((build_sparse_fused(2, 2.0).unwrap() * f).lp_norm(1), 2.0);
    }

    #[test]
    fn scalar_criterion_value() {
        let spec = CriterionSpec::lasso(1, 0.3, PenaltyKind::Identity).unwrap();
        let j = LiftedOperator::identity(1, 1e-3);
        let v = evaluate_criterion(&spec, &[1.0], &[0.0], &[0.5], &j).unwrap();
        assert!((v - 0.275).abs() < 1e-15);
    }

    #[test]
    fn no_update_and_zero_cases() {
        let spec = CriterionSpec::new(
            2,
            WeightSpec::ScaledIdentity(2.0),
            WeightSpec::Zero,
            WeightSpec::Zero,
            RegularizerSpec::none(),
        )
        .unwrap();
        let j = LiftedOperator::identity(2, 1e-3);
        let e = [1.0, -3.0];
        let f = [0.4, 0.1];
        let v = evaluate_criterion(&spec, &e, &f, &f, &j).unwrap();
        assert!((v - 0.5 * 4.0 * 10.0).abs() < 1e-12);
        let zero = evaluate_criterion(&spec, &[0.0; 2], &[0.0; 2], &[0.0; 2], &j).unwrap();
        assert_eq!(zero, 0.0);
        assert!(evaluate_criterion(&spec, &e, &f, &[0.0], &j).is_err());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(CriterionSpec::lasso(3, -1.0, PenaltyKind::Identity).is_err());
        assert!(CriterionSpec::lasso(1, 1.0, PenaltyKind::Fused).is_err());
        assert!(
            CriterionSpec::lasso(3, 1.0, PenaltyKind::SparseFused { fusion_weight: -0.1 }).is_err()
        );
        assert!(CriterionSpec::lasso(3, 1.0, PenaltyKind::Custom(DMatrix::zeros(2, 2))).is_err());
        assert!(WeightSpec::Diagonal(vec![1.0, -1.0]).validate(2).is_err());
    }

    #[test]
    fn uniqueness_flags_singular_lasso() {
        let n = 3;
        let j = LiftedOperator::from_matrix(
            DMatrix::from_row_slice(3, 3, &[0., 0., 0., 1., 0., 0., 0., 1., 0.]),
            1e-3,
        )
        .unwrap();
        let lasso0 = CriterionSpec::lasso(n, 0.0, PenaltyKind::Identity).unwrap();
        assert_eq!(lasso0.uniqueness(&j), Uniqueness::PossiblyNonUnique);
        let lasso = CriterionSpec::lasso(n, 0.1, PenaltyKind::Identity).unwrap();
        assert_eq!(lasso.uniqueness(&j), Uniqueness::Unique);
        let fused = CriterionSpec::lasso(n, 0.1, PenaltyKind::Fused).unwrap();
        assert_eq!(fused.uniqueness(&j), Uniqueness::PossiblyNonUnique);
    }

    #[test]
    fn grams_are_cached_and_symmetric() {
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 3.0]);
        let spec = CriterionSpec::new(
            2,
            WeightSpec::Full(w),
            WeightSpec::Diagonal(vec![1.0, 2.0]),
            WeightSpec::ScaledIdentity(0.5),
            RegularizerSpec::none(),
        )
        .unwrap();
        let g = spec.grams();
        assert_eq!(g.error, g.error.transpose());
        assert_eq!(g.command, DMatrix::from_row_slice(2, 2, &[1., 0., 0., 4.]));
        assert!(std::ptr::eq(g, spec.grams()));
    }

    fn random_instance(
        n: usize,
        seed: &[f64],
    ) -> (CriterionSpec, LiftedOperator, Vec<f64>, Vec<f64>) {
        let jm = DMatrix::from_fn(n, n, |i, k| if i >= k { seed[(i + 2 * k) % seed.len()] } else { 0.0 });
        let j = LiftedOperator::from_matrix(jm, 1e-3).unwrap();
        let spec = CriterionSpec::new(
            n,
            WeightSpec::ScaledIdentity(1.0),
            WeightSpec::ScaledIdentity(0.3),
            WeightSpec::ScaledIdentity(0.2),
            RegularizerSpec::new(0.7, PenaltyKind::SparseFused { fusion_weight: 1.5 }),
        )
        .unwrap();
        let e: Vec<f64> = (0..n).map(|i| seed[(3 * i + 1) % seed.len()]).collect();
        let f: Vec<f64> = (0..n).map(|i| seed[(5 * i + 2) % seed.len()]).collect();
        (spec, j, e, f)
    }

    proptest! {
        #[test]
        fn criterion_is_convex(
            seed in prop::collection::vec(-2.0f64..2.0, 16),
            a in prop::collection::vec(-3.0f64..3.0, 4),
            b in prop::collection::vec(-3.0f64..3.0, 4),
            theta in 0.01f64..0.99,
        ) {
            let (spec, j, e, f) = random_instance(4, &seed);
            let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| theta * x + (1.0 - theta) * y).collect();
            let va = evaluate_criterion(&spec, &e, &f, &a, &j).unwrap();
            let vb = evaluate_criterion(&spec, &e, &f, &b, &j).unwrap();
            let vm = evaluate_criterion(&spec, &e, &f, &mix, &j).unwrap();
            prop_assert!(vm <= theta * va + (1.0 - theta) * vb + 1e-12 * (1.0 + va.abs() + vb.abs()));
        }

        #[test]
        fn sparse_fused_without_fusion_is_lasso(f in prop::collection::vec(-5.0f64..5.0, 2..12)) {
            let d = build_sparse_fused(f.len(), 0.0).unwrap();
            let x = DVector::from_column_slice(&f);
            prop_assert!(((d * &x).lp_norm(1) - x.lp_norm(1)).abs() < 1e-12);
        }
    }
}
