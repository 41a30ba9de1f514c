//! `min |M x|_1  subject to  1/2 |b - A x|^2 <= t`, solved through the
//! penalized form with bisection on the multiplier.

use nalgebra::{DMatrix, DVector};

use super::admm::GeneralizedLasso;
use super::structure::Penalty;
use super::{snap_zeros, Solution, SolverOptions};
use crate::criterion::PenaltyKind;
use crate::error::{check_len, Error, Result};

const BISECTION_STEPS: usize = 60;
const BRACKET_MARGIN: f64 = 1e-3;
/// Relative slack below the level at which the constraint counts as active.
const ACTIVE_SLACK: f64 = 1e-6;

/// Vertically stacks `(A_k, b_k)` blocks.
pub fn stack_blocks(blocks: &[(DMatrix<f64>, DVector<f64>)]) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let cols = blocks.first().map(|(a, _)| a.ncols()).ok_or_else(|| {
        Error::InvalidParameter("at least one block is required".into())
    })?;
    let rows: usize = blocks.iter().map(|(a, _)| a.nrows()).sum();
    let mut a = DMatrix::zeros(rows, cols);
    let mut b = DVector::zeros(rows);
    let mut at = 0;
    for (ak, bk) in blocks {
        check_len("block columns", cols, ak.ncols())?;
        check_len("block rows", ak.nrows(), bk.len())?;
        a.view_mut((at, 0), (ak.nrows(), cols)).copy_from(ak);
        b.rows_mut(at, bk.len()).copy_from(bk);
        at += ak.nrows();
    }
    Ok((a, b))
}

#[derive(Debug, Clone)]
pub struct ConstrainedProblem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub m: PenaltyKind,
}

/// Reusable solver for a fixed `A` and `M`; only `b` and `t` vary.
#[derive(Debug, Clone)]
pub struct ConstrainedSolver {
    a: DMatrix<f64>,
    core: GeneralizedLasso,
}

impl ConstrainedSolver {
    pub fn new(a: DMatrix<f64>, m: &PenaltyKind, opts: &SolverOptions) -> Result<Self> {
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("constraint matrix"));
        }
        let n = a.ncols();
        let reg = crate::criterion::RegularizerSpec::new(0.0, m.clone());
        reg.validate(n)?;
        let p = a.tr_mul(&a);
        let core = GeneralizedLasso::new(p, Penalty::from_kind(m, n), opts.clone())?;
        Ok(Self { a, core })
    }

    fn quadratic(&self, b: &DVector<f64>, x: &DVector<f64>) -> f64 {
        0.5 * (b - &self.a * x).norm_squared()
    }

    /// Lowest attainable value of `1/2 |b - A x|^2`.
    pub fn minimum_level(&self, b: &DVector<f64>) -> Result<f64> {
        check_len("constraint vector", self.a.nrows(), b.len())?;
        let q = self.a.tr_mul(b);
        let ls = self.core.solve_quadratic(&q);
        Ok(self.quadratic(b, &ls.x))
    }

    pub fn solve(&mut self, b: &DVector<f64>, t: f64) -> Result<Solution> {
        check_len("constraint vector", self.a.nrows(), b.len())?;
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("constraint vector"));
        }
        if t.is_nan() || t < 0.0 {
            return Err(Error::InvalidParameter(format!("level must be non-negative, got {t}")));
        }
        let q = self.a.tr_mul(b);
        let ls = self.core.solve_quadratic(&q);
        let minimum = self.quadratic(b, &ls.x);
        let tiny = 1e-14 * (0.5 * b.norm_squared()).max(f64::MIN_POSITIVE);
        if t < minimum - tiny {
            return Err(Error::Infeasible { level: t, minimum });
        }
        let pen = self.core.penalty().clone();
        let l1 = |x: &DVector<f64>| pen.apply(x).lp_norm(1);
        let mut best = Candidate {
            l1: l1(&ls.x),
            x: ls.x.clone(),
            lambda: 0.0,
            kkt: ls.kkt,
            converged: ls.converged,
            iterations: 0,
            diagnostics: ls.diagnostics.clone(),
            level: minimum,
        };
        let mut iterations = 0;
        if t > minimum + tiny {
            let hi_bound = self.core.penalty().dual_bound(&q)? * (1.0 + BRACKET_MARGIN);
            let (mut lo, mut hi) = (0.0, hi_bound);
            self.core.reset_warm_start();
            for step in 0..=BISECTION_STEPS {
                // first probe the top of the bracket
                let lambda = if step == 0 { hi } else { 0.5 * (lo + hi) };
                if lambda <= 0.0 {
                    break;
                }
                let res = self.core.solve(&q, lambda, None)?;
                iterations += res.iterations;
                let level = self.quadratic(b, &res.x);
                if level <= t {
                    let cand_l1 = l1(&res.x);
                    if cand_l1 <= best.l1 {
                        best = Candidate {
                            l1: cand_l1,
                            x: res.x,
                            lambda,
                            kkt: res.kkt,
                            converged: res.converged,
                            iterations,
                            diagnostics: res.diagnostics,
                            level,
                        };
                    }
                    if step == 0 || level >= t * (1.0 - ACTIVE_SLACK) {
                        break;
                    }
                    lo = lambda;
                } else {
                    hi = lambda;
                }
            }
        }
        let mut x = best.x.as_slice().to_vec();
        let support = snap_zeros(&mut x);
        let mut diagnostics = best.diagnostics;
        diagnostics.push(format!("constraint level {:.6e} of {:.6e}", best.level, t));
        Ok(Solution {
            objective: l1(&DVector::from_column_slice(&x)),
            f: x,
            kkt_residual: best.kkt,
            iterations: iterations.max(best.iterations),
            converged: best.converged,
            support,
            lambda: best.lambda,
            diagnostics,
        })
    }
}

struct Candidate {
    x: DVector<f64>,
    l1: f64,
    lambda: f64,
    kkt: f64,
    converged: bool,
    iterations: usize,
    diagnostics: Vec<String>,
    level: f64,
}

/// One-shot form of [`ConstrainedSolver::solve`].
pub fn solve_constrained_l1(problem: &ConstrainedProblem, t: f64, opts: &SolverOptions) -> Result<Solution> {
    ConstrainedSolver::new(problem.a.clone(), &problem.m, opts)?.solve(&problem.b, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(seed: u64, rows: usize, cols: usize) -> ConstrainedProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ConstrainedProblem {
            a: DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0)),
            b: DVector::from_fn(rows, |_, _| rng.random_range(-1.0..1.0)),
            m: PenaltyKind::Identity,
        }
    }

    #[test]
    fn unbounded_level_gives_zero() {
        let p = random_problem(1, 10, 6);
        let sol = solve_constrained_l1(&p, f64::INFINITY, &SolverOptions::default()).unwrap();
        assert!(sol.f.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn minimum_level_gives_least_squares() {
        let p = random_problem(2, 10, 6);
        let ls = p.a.clone().svd(true, true).solve(&p.b, 1e-14).unwrap();
        let t = 0.5 * (&p.b - &p.a * &ls).norm_squared();
        let sol = solve_constrained_l1(&p, t, &SolverOptions::default()).unwrap();
        let x = DVector::from_column_slice(&sol.f);
        assert!((x - ls).amax() < 1e-9);
        assert_eq!(sol.lambda, 0.0);
    }

    #[test]
    fn constraint_is_active_at_return() {
        let p = random_problem(3, 12, 6);
        let solver = ConstrainedSolver::new(p.a.clone(), &p.m, &SolverOptions::default()).unwrap();
        let t = 1.3 * solver.minimum_level(&p.b).unwrap();
        let sol = solve_constrained_l1(&p, t, &SolverOptions::default()).unwrap();
        let level = 0.5 * (&p.b - &p.a * DVector::from_column_slice(&sol.f)).norm_squared();
        assert!(level <= t && level >= t * (1.0 - 1e-6), "{level} vs {t}");
        assert!(sol.lambda > 0.0);
    }

    #[test]
    fn level_below_minimum_is_infeasible() {
        let p = random_problem(4, 10, 3);
        let err = solve_constrained_l1(&p, 1e-6, &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Infeasible { .. }));
    }
}
