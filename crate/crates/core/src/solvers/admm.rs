//! ADMM for `min 1/2 x^T P x - q^T x + lambda |D x|_1`, split as `z = D x`,
//! with support polishing and a KKT certificate.

use std::collections::HashMap;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::structure::{kkt_residual, NullBasis, Penalty};
use super::SolverOptions;
use crate::error::{Error, Result};

const MAX_RHO_EXPONENT: i32 = 40;

#[derive(Debug, Clone)]
pub(crate) struct CoreResult {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub kkt: f64,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone)]
struct WarmStart {
    z: DVector<f64>,
    u: DVector<f64>,
    rho_exponent: i32,
}

/// Quadratic data and cached factorizations, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub(crate) struct GeneralizedLasso {
    p: DMatrix<f64>,
    /// Mean diagonal of `P`, used to normalize the ADMM iteration.
    scale: f64,
    pen: Penalty,
    dtd: DMatrix<f64>,
    opts: SolverOptions,
    inverses: HashMap<i32, DMatrix<f64>>,
    warm: Option<WarmStart>,
}

impl GeneralizedLasso {
    pub fn new(p: DMatrix<f64>, pen: Penalty, opts: SolverOptions) -> Result<Self> {
        opts.validate()?;
        let n = p.nrows();
        if !p.is_square() || pen.cols() != n {
            return Err(Error::DimensionMismatch {
                context: "quadratic and penalty dimensions",
                expected: n,
                found: pen.cols(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("quadratic term"));
        }
        let mean_diag = p.diagonal().mean();
        let scale = if mean_diag > 0.0 { mean_diag } else { 1.0 };
        let dtd = pen.gram();
        Ok(Self {
            p,
            scale,
            pen,
            dtd,
            opts,
            inverses: HashMap::new(),
            warm: None,
        })
    }

    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    pub fn penalty(&self) -> &Penalty {
        &self.pen
    }

    pub fn options(&self) -> &SolverOptions {
        &self.opts
    }

    fn kkt_scale(&self, x: &DVector<f64>, q: &DVector<f64>, lambda: f64) -> f64 {
        let s = q.amax().max((&self.p * x).amax()).max(lambda);
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }

    /// Scaled KKT residual of `x`, taking the zero set from the snapped `D x`.
    pub fn certify(&self, x: &DVector<f64>, q: &DVector<f64>, lambda: f64, dual: Option<&DVector<f64>>) -> f64 {
        let dx = self.pen.apply(x);
        let tol = super::zero_threshold(dx.amax());
        let zero: Vec<bool> = dx.iter().map(|v| v.abs() <= tol).collect();
        let mut dx = dx;
        dx.iter_mut().zip(&zero).for_each(|(v, z)| {
            if *z {
                *v = 0.0
            }
        });
        self.certify_pattern(x, q, lambda, &dx, &zero, dual)
    }

    fn certify_pattern(
        &self,
        x: &DVector<f64>,
        q: &DVector<f64>,
        lambda: f64,
        dx: &DVector<f64>,
        zero: &[bool],
        dual: Option<&DVector<f64>>,
    ) -> f64 {
        let grad = &self.p * x - q;
        let scale = self.kkt_scale(x, q, lambda);
        kkt_residual(&self.pen, &grad, lambda, dx, zero, dual, self.opts.kkt_tol * scale) / scale
    }

    /// Minimizer of the quadratic alone: Cholesky, or the minimum-norm
    /// least-squares solution when `P` is singular.
    pub fn solve_quadratic(&self, q: &DVector<f64>) -> CoreResult {
        let mut diagnostics = Vec::new();
        let x = match Cholesky::new(&self.p / self.scale) {
            Some(ch) if chol_is_well_conditioned(&ch) => ch.solve(&(q / self.scale)),
            _ => {
                diagnostics.push("singular normal matrix, using the minimum-norm solution".to_string());
                pinv_solve(&self.p, q)
            }
        };
        let kkt = self.certify(&x, q, 0.0, None);
        CoreResult {
            converged: kkt <= self.opts.kkt_tol,
            x,
            iterations: 0,
            kkt,
            diagnostics,
        }
    }

    /// Minimizer over `x = B y` of `1/2 x^T P x - (q - lambda D^T s)^T x`
    /// where `s` carries the signs of the nonzero rows of `D x`.
    pub fn restricted_solve(
        &self,
        basis: &NullBasis,
        q: &DVector<f64>,
        lambda: f64,
        signs: &DVector<f64>,
    ) -> (DVector<f64>, bool) {
        let n = self.n();
        if basis.dim() == 0 {
            return (DVector::zeros(n), true);
        }
        let rhs = if lambda > 0.0 { q - self.pen.apply_t(signs) * lambda } else { q.clone() };
        let pr = basis.project_matrix(&self.p) / self.scale;
        let br = basis.project(&rhs) / self.scale;
        match Cholesky::new(pr.clone()) {
            Some(ch) if chol_is_well_conditioned(&ch) => (basis.expand(&ch.solve(&br), n), true),
            _ => (basis.expand(&pinv_solve(&pr, &br), n), false),
        }
    }

    fn inverse(&mut self, exponent: i32) -> Result<&DMatrix<f64>> {
        if !self.inverses.contains_key(&exponent) {
            let rho = self.opts.rho * 2f64.powi(exponent);
            let m = &self.p / self.scale + &self.dtd * rho;
            let ch = Cholesky::new(m).ok_or(Error::Singular {
                what: "ADMM system matrix",
                rcond: 0.0,
            })?;
            self.inverses.insert(exponent, ch.inverse());
        }
        Ok(&self.inverses[&exponent])
    }

    pub fn reset_warm_start(&mut self) {
        self.warm = None;
    }

    /// Solves for the given linear term and weight.
    ///
    /// `start` seeds the iteration when there is no stored warm start.
    pub fn solve(&mut self, q: &DVector<f64>, lambda: f64, start: Option<&DVector<f64>>) -> Result<CoreResult> {
        let n = self.n();
        if q.len() != n {
            return Err(Error::DimensionMismatch {
                context: "linear term",
                expected: n,
                found: q.len(),
            });
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("linear term"));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be non-negative, got {lambda}")));
        }
        if lambda == 0.0 {
            return Ok(self.solve_quadratic(q));
        }
        let m = self.pen.rows();
        let qn = q / self.scale;
        let kappa = lambda / self.scale;
        let alpha = self.opts.over_relaxation;
        let (mut z, mut u, mut exponent) = match self.warm.take() {
            Some(w) if w.z.len() == m => (w.z, w.u, w.rho_exponent),
            _ => {
                let z = match start {
                    Some(x0) => self.pen.apply(x0),
                    None => DVector::zeros(m),
                };
                (z, DVector::zeros(m), 0)
            }
        };
        let mut diagnostics = Vec::new();
        let mut next_polish = 5usize;
        let mut last_pattern: Option<Vec<bool>> = None;
        let mut x = DVector::zeros(n);
        let mut best: Option<(DVector<f64>, f64)> = None;
        let sqrt_m = (m as f64).sqrt();
        let sqrt_n = (n as f64).sqrt();

        for k in 1..=self.opts.max_iterations {
            let rho = self.opts.rho * 2f64.powi(exponent);
            let rhs = &qn + self.pen.apply_t(&(&z - &u)) * rho;
            x = self.inverse(exponent)? * rhs;
            let dx = self.pen.apply(&x);
            let relaxed = &dx * alpha + &z * (1.0 - alpha);
            let z_old = z.clone();
            z = soft(&(&relaxed + &u), kappa / rho);
            u += &relaxed - &z;

            let r_norm = (&dx - &z).norm();
            let s_norm = rho * self.pen.apply_t(&(&z - &z_old)).norm();
            let eps_pri = sqrt_m * self.opts.abs_tol + self.opts.rel_tol * dx.norm().max(z.norm());
            let eps_dual = sqrt_n * self.opts.abs_tol + self.opts.rel_tol * rho * self.pen.apply_t(&u).norm();
            let admm_done = r_norm <= eps_pri && s_norm <= eps_dual;

            if k >= next_polish || admm_done || k == self.opts.max_iterations {
                if k >= next_polish {
                    next_polish = (next_polish * 3 / 2).max(next_polish + 5);
                }
                let pattern: Vec<bool> = z.iter().map(|v| *v == 0.0).collect();
                if last_pattern.as_ref() != Some(&pattern) {
                    let dual = &u * (rho / kappa);
                    let (cand, kkt) = self.polish(q, lambda, &z, &pattern, &dual);
                    last_pattern = Some(pattern);
                    if kkt <= self.opts.kkt_tol {
                        self.warm = Some(WarmStart { z, u, rho_exponent: exponent });
                        return Ok(CoreResult {
                            x: cand,
                            iterations: k,
                            converged: true,
                            kkt,
                            diagnostics,
                        });
                    }
                    if best.as_ref().map_or(true, |(_, b)| kkt < *b) {
                        best = Some((cand, kkt));
                    }
                }
            }

            if k % 10 == 0 {
                if r_norm > 10.0 * s_norm && exponent < MAX_RHO_EXPONENT {
                    exponent += 1;
                    u /= 2.0;
                } else if s_norm > 10.0 * r_norm && exponent > -MAX_RHO_EXPONENT {
                    exponent -= 1;
                    u *= 2.0;
                }
            }
        }

        diagnostics.push(format!(
            "ADMM stopped after {} iterations without a certified solution",
            self.opts.max_iterations
        ));
        let kkt_x = self.certify(&x, q, lambda, None);
        let (x, kkt) = match best {
            Some((cand, kkt)) if kkt < kkt_x => (cand, kkt),
            _ => (x, kkt_x),
        };
        self.warm = Some(WarmStart { z, u, rho_exponent: exponent });
        Ok(CoreResult {
            x,
            iterations: self.opts.max_iterations,
            converged: kkt <= self.opts.kkt_tol,
            kkt,
            diagnostics,
        })
    }

    /// Solves the smooth problem on the structure implied by `z`.
    fn polish(
        &self,
        q: &DVector<f64>,
        lambda: f64,
        z: &DVector<f64>,
        zero: &[bool],
        dual: &DVector<f64>,
    ) -> (DVector<f64>, f64) {
        let basis = self.pen.null_basis(zero);
        let signs = z.map(f64::signum);
        let (x, _) = self.restricted_solve(&basis, q, lambda, &signs);
        let dx = self.pen.apply(&x);
        // the basis enforces the zero rows, up to rounding in the dense case
        let mut dx_clean = dx;
        dx_clean.iter_mut().zip(zero).for_each(|(v, z)| {
            if *z {
                *v = 0.0
            }
        });
        if dx_clean.iter().zip(signs.iter()).any(|(a, s)| *s != 0.0 && a.signum() != *s) {
            return (x.clone(), self.certify(&x, q, lambda, Some(dual)));
        }
        let kkt = self.certify_pattern(&x, q, lambda, &dx_clean, zero, Some(dual));
        (x, kkt)
    }
}

pub(crate) fn soft(x: &DVector<f64>, kappa: f64) -> DVector<f64> {
    x.map(|v| v.signum() * (v.abs() - kappa).max(0.0))
}

fn chol_is_well_conditioned(ch: &Cholesky<f64, Dyn>) -> bool {
    let d = ch.l_dirty().diagonal();
    let (min, max) = d.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    max > 0.0 && (min / max).powi(2) > d.len() as f64 * f64::EPSILON
}

/// Minimum-norm least-squares solution of `a x = b`.
pub(crate) fn pinv_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let eps = svd.singular_values.max() * a.nrows().max(a.ncols()) as f64 * f64::EPSILON;
    svd.solve(b, eps).expect("u and v were computed")
}
