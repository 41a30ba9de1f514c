use nalgebra::{Cholesky, DMatrix, Dyn};

use super::ExplicitGains;
use crate::criterion::WeightSpec;
use crate::error::{Error, Result};
use crate::lti::LiftedOperator;

/// Closed-form gains of the quadratic criterion:
///
/// ```text
/// L = (J^T We J + Wdf)^-1 J^T We
/// Q = (J^T We J + Wf + Wdf)^-1 (J^T We J + Wdf)
/// ```
///
/// with `W` denoting Gram forms.
pub fn norm_optimal_gains(
    j: &LiftedOperator,
    w_error: &WeightSpec,
    w_command: &WeightSpec,
    w_change: &WeightSpec,
) -> Result<ExplicitGains> {
    let n = j.size();
    w_error.validate(n)?;
    w_command.validate(n)?;
    w_change.validate(n)?;
    let jt_we = j.matrix().transpose() * w_error.gram(n);
    let a = &jt_we * j.matrix() + w_change.gram(n);
    let chol_a = factor(&a, "J^T We J + Wdf")?;
    let l = chol_a.solve(&jt_we);
    let q = if w_command.is_zero() {
        DMatrix::identity(n, n)
    } else {
        let b = &a + w_command.gram(n);
        factor(&b, "J^T We J + Wf + Wdf")?.solve(&a)
    };
    ExplicitGains::new(l, q)
}

fn factor(m: &DMatrix<f64>, what: &'static str) -> Result<Cholesky<f64, Dyn>> {
    let n = m.nrows();
    match Cholesky::new(m.clone()) {
        Some(ch) => {
            let d = ch.l_dirty().diagonal();
            let (lo, hi) = d.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
            let rcond = if hi > 0.0 { (lo / hi).powi(2) } else { 0.0 };
            if rcond > n as f64 * f64::EPSILON {
                Ok(ch)
            } else {
                Err(Error::Singular { what, rcond })
            }
        }
        None => Err(Error::Singular { what, rcond: 0.0 }),
    }
}
