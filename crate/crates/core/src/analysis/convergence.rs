use nalgebra::{Complex, DMatrix};

use crate::error::{check_len, Error, Result};
use crate::lti::{FrequencyDomain, FrequencyGrid, TransferFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Converges,
    Diverges,
    /// Factor equal to one within rounding, or a singular grid frequency.
    Marginal,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Converges => "converges",
            Verdict::Diverges => "diverges",
            Verdict::Marginal => "marginal",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// Grid maximum of `|Q (1 - L J)|`.
    pub rho_hat: f64,
    /// Spectral norm of the lifted `Q (I - L J)`, when computed.
    pub lifted_factor: Option<f64>,
    pub verdict: Verdict,
    /// Frequency (rad/sample) where the maximum is attained.
    pub peak_omega: f64,
}

impl ConvergenceReport {
    pub fn with_lifted_factor(mut self, factor: f64) -> Self {
        self.lifted_factor = Some(factor);
        self
    }
}

/// Pointwise responses of an explicit learning loop.
pub(crate) struct LoopPoint {
    /// `Q (1 - L J)`
    pub x: Complex<f64>,
    /// `J Q L`
    pub jql: Complex<f64>,
    pub q: Complex<f64>,
}

pub(crate) fn loop_point<Q, L, J>(q: &Q, l: &L, j: &J, omega: f64) -> LoopPoint
where
    Q: FrequencyDomain + ?Sized,
    L: FrequencyDomain + ?Sized,
    J: FrequencyDomain + ?Sized,
{
    let (qv, lv, jv) = (q.response_at(omega), l.response_at(omega), j.response_at(omega));
    LoopPoint {
        x: qv * (Complex::new(1.0, 0.0) - lv * jv),
        jql: jv * qv * lv,
        q: qv,
    }
}

fn is_finite(c: Complex<f64>) -> bool {
    c.re.is_finite() && c.im.is_finite()
}

/// Contraction factor of `f_{j+1} = Q (f_j + L e_j)` acting on `J`.
///
/// The factor is a grid maximum, hence a lower bound of the true norm.
pub fn convergence_factor<Q, L, J>(q: &Q, l: &L, j: &J, grid: &FrequencyGrid) -> ConvergenceReport
where
    Q: FrequencyDomain + ?Sized,
    L: FrequencyDomain + ?Sized,
    J: FrequencyDomain + ?Sized,
{
    let mut rho = 0.0;
    let mut peak = grid.omega()[0];
    let mut singular = false;
    for &w in grid.omega() {
        let x = loop_point(q, l, j, w).x;
        let m = x.norm();
        if !is_finite(x) || m.is_nan() {
            singular = true;
            rho = f64::INFINITY;
            peak = w;
            break;
        }
        if m > rho {
            rho = m;
            peak = w;
        }
    }
    let verdict = if singular {
        Verdict::Marginal
    } else if rho < 1.0 {
        Verdict::Converges
    } else if rho <= 1.0 + 1e-9 {
        Verdict::Marginal
    } else {
        Verdict::Diverges
    };
    ConvergenceReport {
        rho_hat: rho,
        lifted_factor: None,
        verdict,
        peak_omega: peak,
    }
}

/// Spectral norm of `Q (I - L J)` for lifted operators.
pub fn lifted_contraction_factor(q: &DMatrix<f64>, l: &DMatrix<f64>, j: &DMatrix<f64>) -> Result<f64> {
    let n = j.nrows();
    for (context, m) in [("lifted Q", q), ("lifted L", l), ("lifted J", j)] {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch {
                context,
                expected: n,
                found: m.ncols(),
            });
        }
    }
    let m = q * (DMatrix::identity(n, n) - l * j);
    Ok(m.singular_values().max())
}

/// Stationary norm-optimal filters for scalar weights.
///
/// For long tasks the lifted gains approach the non-rational responses
/// `L = conj(J) w_e / (|J|^2 w_e + w_df)` and
/// `Q = (|J|^2 w_e + w_df) / (|J|^2 w_e + w_f + w_df)`, with all weights in
/// squared (Gram) form.
#[derive(Debug, Clone)]
pub struct StationaryNormOptimal {
    pub model: TransferFunction,
    pub w_error: f64,
    pub w_command: f64,
    pub w_change: f64,
}

impl StationaryNormOptimal {
    pub fn new(model: TransferFunction, w_error: f64, w_command: f64, w_change: f64) -> Result<Self> {
        for v in [w_error, w_command, w_change] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("weights must be non-negative, got {v}")));
            }
        }
        if w_error == 0.0 {
            return Err(Error::InvalidParameter("error weight must be positive".into()));
        }
        Ok(Self {
            model,
            w_error,
            w_command,
            w_change,
        })
    }

    pub fn learning(&self) -> StationaryFilter<'_> {
        StationaryFilter { gains: self, which: Which::Learning }
    }

    pub fn robustness(&self) -> StationaryFilter<'_> {
        StationaryFilter { gains: self, which: Which::Robustness }
    }
}

#[derive(Debug, Clone, Copy)]
enum Which {
    Learning,
    Robustness,
}

#[derive(Debug, Clone, Copy)]
pub struct StationaryFilter<'a> {
    gains: &'a StationaryNormOptimal,
    which: Which,
}

impl FrequencyDomain for StationaryFilter<'_> {
    fn response_at(&self, omega: f64) -> Complex<f64> {
        let g = self.gains;
        let j = g.model.response_at(omega);
        let inner = j.norm_sqr() * g.w_error + g.w_change;
        match self.which {
            Which::Learning => j.conj() * g.w_error / inner,
            Which::Robustness => Complex::new(inner / (inner + g.w_command), 0.0),
        }
    }
}

/// Amplification of the trial-varying disturbance by inverse-model learning
/// with gain `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseAmplification {
    pub exact: f64,
    /// First-order value for small `alpha`.
    pub small_gain: f64,
}

pub fn noise_amplification(alpha: f64) -> Result<NoiseAmplification> {
    crate::engine::check_alpha(alpha)?;
    Ok(NoiseAmplification {
        exact: 1.0 + alpha * alpha / (2.0 * alpha - alpha * alpha),
        small_gain: 1.0 + 0.5 * alpha,
    })
}

pub(crate) fn check_grid_len(grid: &FrequencyGrid, values: &[f64], what: &'static str) -> Result<()> {
    check_len(what, grid.len(), values.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{ResponseFn, TransferFunction};

    const TS: f64 = 1e-3;

    fn plant() -> TransferFunction {
        TransferFunction::with_delay(vec![0.4, 0.1], vec![1.0, -0.5], 1, TS).unwrap()
    }

    #[test]
    fn inverse_model_contracts_to_zero() {
        let j = plant();
        let grid = FrequencyGrid::default();
        let rep = convergence_factor(&TransferFunction::gain(1.0, TS), &j.inverse().unwrap(), &j, &grid);
        assert!(rep.rho_hat < 1e-12, "{}", rep.rho_hat);
        assert_eq!(rep.verdict, Verdict::Converges);
    }

    #[test]
    fn no_learning_is_marginal() {
        let grid = FrequencyGrid::default();
        let rep = convergence_factor(
            &TransferFunction::gain(1.0, TS),
            &TransferFunction::zero(TS),
            &plant(),
            &grid,
        );
        assert_eq!(rep.rho_hat, 1.0);
        assert_eq!(rep.verdict, Verdict::Marginal);
    }

    #[test]
    fn scaled_inverse_gives_pointwise_factor() {
        let j = plant();
        let grid = FrequencyGrid::default();
        let l = j.inverse().unwrap().scale(0.7);
        let rep = convergence_factor(&TransferFunction::gain(1.0, TS), &l, &j, &grid);
        assert!((rep.rho_hat - 0.3).abs() < 1e-12);
        let l = j.inverse().unwrap().scale(2.5);
        let rep = convergence_factor(&TransferFunction::gain(1.0, TS), &l, &j, &grid);
        assert_eq!(rep.verdict, Verdict::Diverges);
    }

    #[test]
    fn singular_frequency_is_marginal() {
        let integrator = TransferFunction::new(vec![1.0], vec![1.0, -1.0], TS).unwrap();
        let grid = FrequencyGrid::new(vec![0.5, 1.0, std::f64::consts::PI]).unwrap();
        let osc = TransferFunction::new(vec![1.0], vec![1.0, -2.0 * 1f64.cos(), 1.0], TS).unwrap();
        let rep = convergence_factor(&TransferFunction::gain(1.0, TS), &osc, &integrator, &grid);
        assert_eq!(rep.verdict, Verdict::Marginal);
        assert!(rep.rho_hat.is_infinite());
    }

    #[test]
    fn stationary_norm_optimal_limits() {
        let j = plant();
        let g = StationaryNormOptimal::new(j.clone(), 1.0, 0.0, 1e-12).unwrap();
        let grid = FrequencyGrid::default();
        let rep = convergence_factor(&g.robustness(), &g.learning(), &j, &grid);
        assert!(rep.rho_hat < 1e-9, "{}", rep.rho_hat);
        let g = StationaryNormOptimal::new(j.clone(), 1.0, 0.1, 0.0).unwrap();
        let q = g.robustness().response_at(0.3);
        let m = j.response_at(0.3).norm_sqr();
        assert!((q.re - m / (m + 0.1)).abs() < 1e-15 && q.im == 0.0);
        let rep = convergence_factor(&g.robustness(), &g.learning(), &j, &grid);
        assert!(rep.rho_hat < 1.0);
        // closure-defined responses behave like rational ones
        let l = ResponseFn(|w: f64| 0.5 / j.response_at(w));
        let rep = convergence_factor(&TransferFunction::gain(1.0, TS), &l, &j, &grid);
        assert!((rep.rho_hat - 0.5).abs() < 1e-12);
    }

    #[test]
    fn lifted_factor_of_scaled_inverse() {
        let n = 6;
        let j = DMatrix::from_fn(n, n, |i, k| if i >= k { 0.5f64.powi((i - k) as i32) } else { 0.0 });
        let l = j.clone().try_inverse().unwrap() * 0.7;
        let f = lifted_contraction_factor(&DMatrix::identity(n, n), &l, &j).unwrap();
        assert!((f - 0.3).abs() < 1e-12);
        assert!(lifted_contraction_factor(&DMatrix::identity(2, 2), &l, &j).is_err());
    }

    #[test]
    fn amplification_values() {
        assert_eq!(noise_amplification(1.0).unwrap().exact, 2.0);
        let a = noise_amplification(0.2).unwrap();
        assert!((a.exact - (1.0 + 0.04 / 0.36)).abs() < 1e-15);
        assert!((a.small_gain - 1.1).abs() < 1e-15);
        for alpha in [1e-3, 1e-5, 1e-7] {
            let a = noise_amplification(alpha).unwrap();
            assert!(((a.exact - 1.0) / (alpha / 2.0) - 1.0).abs() < alpha);
        }
        assert!(noise_amplification(0.0).is_err());
    }
}
