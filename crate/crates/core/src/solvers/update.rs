use nalgebra::{DMatrix, DVector};

use super::admm::GeneralizedLasso;
use super::structure::Penalty;
use super::{snap_zeros, zero_threshold, Solution, SolverOptions};
use crate::criterion::{
    cumulative_sum_matrix, evaluate_criterion, CriterionSpec, PenaltyKind, Uniqueness, WeightSpec,
};
use crate::error::{check_len, Error, Result};
use crate::lti::LiftedOperator;

/// Elementwise `sign(x) max(|x| - kappa, 0)`.
///
/// # Panics
/// If `kappa` is negative or NaN.
pub fn soft_threshold(x: &[f64], kappa: f64) -> Vec<f64> {
    assert!(kappa >= 0.0, "threshold must be non-negative, got {kappa}");
    x.iter().map(|v| v.signum() * (v.abs() - kappa).max(0.0)).collect()
}

/// Solver for one criterion and lifted model, reusable across trials.
///
/// The quadratic normal matrix and its ADMM factorizations are computed once.
#[derive(Debug, Clone)]
pub struct UpdateSolver {
    spec: CriterionSpec,
    j: LiftedOperator,
    jt_we: DMatrix<f64>,
    core: GeneralizedLasso,
    uniqueness: Uniqueness,
}

impl UpdateSolver {
    pub fn new(spec: &CriterionSpec, j: &LiftedOperator, opts: &SolverOptions) -> Result<Self> {
        let n = spec.len();
        check_len("lifted model", n, j.size())?;
        let grams = spec.grams();
        let jt_we = j.matrix().tr_mul(&grams.error);
        let p = &jt_we * j.matrix() + &grams.command + &grams.change;
        let pen = Penalty::from_kind(&spec.regularizer.kind, n);
        Ok(Self {
            spec: spec.clone(),
            j: j.clone(),
            jt_we,
            core: GeneralizedLasso::new(p, pen, opts.clone())?,
            uniqueness: spec.uniqueness(j),
        })
    }

    pub fn spec(&self) -> &CriterionSpec {
        &self.spec
    }

    /// Linear term of the criterion for the measured trial.
    fn linear_term(&self, e_j: &DVector<f64>, f_j: &DVector<f64>) -> DVector<f64> {
        let grams = self.spec.grams();
        &self.jt_we * (e_j + self.j.matrix() * f_j) + &grams.change * f_j
    }

    fn check_inputs(&self, e_j: &[f64], f_j: &[f64]) -> Result<()> {
        let n = self.spec.len();
        check_len("error signal", n, e_j.len())?;
        check_len("command signal", n, f_j.len())?;
        crate::error::check_finite(e_j, "error signal")?;
        crate::error::check_finite(f_j, "command signal")
    }

    /// Minimizes the criterion for the measured trial `(e_j, f_j)`.
    pub fn solve(&mut self, e_j: &[f64], f_j: &[f64]) -> Result<Solution> {
        self.check_inputs(e_j, f_j)?;
        let e = DVector::from_column_slice(e_j);
        let fj = DVector::from_column_slice(f_j);
        let q = self.linear_term(&e, &fj);
        let lambda = self.spec.lambda();
        let res = self.core.solve(&q, lambda, Some(&fj))?;
        let mut diagnostics = res.diagnostics;
        if self.uniqueness == Uniqueness::PossiblyNonUnique {
            diagnostics.push("criterion may have multiple minimizers".into());
        }
        let mut f = res.x.as_slice().to_vec();
        snap_zeros(&mut f);
        let mut objective = evaluate_criterion(&self.spec, e_j, f_j, &f, &self.j)?;
        let mut kkt = res.kkt;
        let stay = evaluate_criterion(&self.spec, e_j, f_j, f_j, &self.j)?;
        if stay < objective {
            diagnostics.push("no-update candidate has a lower objective and was kept".into());
            f = f_j.to_vec();
            objective = stay;
            kkt = self.core.certify(&fj, &q, lambda, None);
        }
        let support = support_of(&f);
        Ok(Solution {
            f,
            objective,
            kkt_residual: kkt,
            iterations: res.iterations,
            converged: kkt <= self.core.options().kkt_tol,
            support,
            lambda,
            diagnostics,
        })
    }

    /// Re-solves the quadratic part on the structure of `sol`: its support for
    /// the identity penalty, its constant segments for fused penalties.
    pub fn debias(&self, sol: &Solution, e_j: &[f64], f_j: &[f64]) -> Result<Solution> {
        self.check_inputs(e_j, f_j)?;
        check_len("solution", self.spec.len(), sol.f.len())?;
        let e = DVector::from_column_slice(e_j);
        let fj = DVector::from_column_slice(f_j);
        let f = DVector::from_column_slice(&sol.f);
        let q = self.linear_term(&e, &fj);
        let dx = self.core.penalty().apply(&f);
        let tol = zero_threshold(dx.amax());
        let zero: Vec<bool> = dx.iter().map(|v| v.abs() <= tol).collect();
        let basis = self.core.penalty().null_basis(&zero);
        let (x, full_rank) = self.core.restricted_solve(&basis, &q, 0.0, &DVector::zeros(dx.len()));
        let mut diagnostics = sol.diagnostics.clone();
        if !full_rank {
            diagnostics.push("rank-deficient restricted problem, using the minimum-norm solution".into());
        }
        let mut out = x.as_slice().to_vec();
        for (v, old) in out.iter_mut().zip(&sol.f) {
            if *old == 0.0 {
                *v = 0.0;
            }
        }
        let before = self.smooth_value(&e, &fj, &f);
        let after = self.smooth_value(&e, &fj, &DVector::from_column_slice(&out));
        if after > before {
            diagnostics.push("re-estimate did not lower the quadratic part and was discarded".into());
            out = sol.f.clone();
        }
        let objective = evaluate_criterion(&self.spec, e_j, f_j, &out, &self.j)?;
        Ok(Solution {
            support: support_of(&out),
            f: out,
            objective,
            kkt_residual: sol.kkt_residual,
            iterations: sol.iterations,
            converged: sol.converged,
            lambda: sol.lambda,
            diagnostics,
        })
    }

    /// `1/2 |We (e_j - J (f - f_j))|^2 + 1/2 |Wf f|^2 + 1/2 |Wdf (f - f_j)|^2`.
    fn smooth_value(&self, e: &DVector<f64>, fj: &DVector<f64>, f: &DVector<f64>) -> f64 {
        let step = f - fj;
        let pred = e - self.j.matrix() * &step;
        0.5 * (self.spec.w_error.apply(&pred).norm_squared()
            + self.spec.w_command.apply(f).norm_squared()
            + self.spec.w_change.apply(&step).norm_squared())
    }
}

fn support_of(f: &[f64]) -> Vec<usize> {
    f.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, _)| i)
        .collect()
}

pub fn solve_update(
    spec: &CriterionSpec,
    e_j: &[f64],
    f_j: &[f64],
    j: &LiftedOperator,
    opts: &SolverOptions,
) -> Result<Solution> {
    UpdateSolver::new(spec, j, opts)?.solve(e_j, f_j)
}

pub fn debias(
    sol: &Solution,
    spec: &CriterionSpec,
    e_j: &[f64],
    f_j: &[f64],
    j: &LiftedOperator,
) -> Result<Solution> {
    UpdateSolver::new(spec, j, &SolverOptions::default())?.debias(sol, e_j, f_j)
}

/// Smallest `lambda` for which the pure lasso update is exactly zero:
/// `|J^T We (e_j + J f_j)|_inf`.
pub fn lasso_lambda_max(
    j: &LiftedOperator,
    w_error: &WeightSpec,
    e_j: &[f64],
    f_j: &[f64],
    kind: &PenaltyKind,
) -> Result<f64> {
    if *kind != PenaltyKind::Identity {
        return Err(Error::Unsupported(
            "the zero-solution threshold is only available for the identity penalty".into(),
        ));
    }
    let n = j.size();
    check_len("error signal", n, e_j.len())?;
    check_len("command signal", n, f_j.len())?;
    w_error.validate(n)?;
    let target = DVector::from_column_slice(e_j) + j.matrix() * DVector::from_column_slice(f_j);
    let q = j.matrix().tr_mul(&(w_error.gram(n) * target));
    Ok(q.amax())
}

/// Which increments the transformed lasso penalizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IncrementPenalty {
    /// All `N` increments, including the first sample `f(0)`.
    #[default]
    AllIncrements,
    /// Only the `N - 1` differences, matching the fused penalty.
    DifferencesOnly,
}

impl IncrementPenalty {
    /// The penalty matrix on `f` this variant is equivalent to.
    pub fn equivalent_kind(self, n: usize) -> PenaltyKind {
        match self {
            IncrementPenalty::AllIncrements => {
                PenaltyKind::Custom(crate::criterion::build_incremental_map(n))
            }
            IncrementPenalty::DifferencesOnly => PenaltyKind::Fused,
        }
    }
}

/// Solves a fused problem as a lasso in the increments `D_i f`, with
/// `J_i = J D_i^-1`, and maps back with a cumulative sum.
pub fn solve_fused_via_increments(
    spec: &CriterionSpec,
    e_j: &[f64],
    f_j: &[f64],
    j: &LiftedOperator,
    opts: &SolverOptions,
    variant: IncrementPenalty,
) -> Result<Solution> {
    let n = spec.len();
    if spec.regularizer.kind != PenaltyKind::Fused {
        return Err(Error::Unsupported("increment transform needs the fused penalty".into()));
    }
    if !spec.w_command.is_zero() || !spec.w_change.is_zero() {
        return Err(Error::Unsupported(
            "increment transform assumes zero command and change weights".into(),
        ));
    }
    check_len("lifted model", n, j.size())?;
    check_len("error signal", n, e_j.len())?;
    check_len("command signal", n, f_j.len())?;
    let cumsum = cumulative_sum_matrix(n);
    let ji = j.matrix() * &cumsum;
    let we = spec.grams().error.clone();
    let ji_t_we = ji.tr_mul(&we);
    let p = &ji_t_we * &ji;
    let target = DVector::from_column_slice(e_j) + j.matrix() * DVector::from_column_slice(f_j);
    let q = &ji_t_we * target;
    let pen = match variant {
        IncrementPenalty::AllIncrements => Penalty::Identity(n),
        IncrementPenalty::DifferencesOnly => Penalty::Dense(DMatrix::identity(n, n).rows(1, n - 1).into_owned()),
    };
    let mut core = GeneralizedLasso::new(p, pen, opts.clone())?;
    let lambda = spec.lambda();
    let res = core.solve(&q, lambda, None)?;
    let mut increments = res.x.as_slice().to_vec();
    snap_zeros(&mut increments);
    let f = (&cumsum * DVector::from_vec(increments)).as_slice().to_vec();
    let equivalent = CriterionSpec::new(
        n,
        spec.w_error.clone(),
        WeightSpec::Zero,
        WeightSpec::Zero,
        crate::criterion::RegularizerSpec::new(lambda, variant.equivalent_kind(n)),
    )?;
    let objective = evaluate_criterion(&equivalent, e_j, f_j, &f, j)?;
    Ok(Solution {
        support: support_of(&f),
        f,
        objective,
        kkt_residual: res.kkt,
        iterations: res.iterations,
        converged: res.converged,
        lambda,
        diagnostics: res.diagnostics,
    })
}
