use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};
use crate::lti::{feedback_connect, lift, FeedbackLoop, LiftedOperator, TransferFunction};

/// Parameters of the default motion system and its feedback controller.
///
/// The plant is a rigid body with one collocated antiresonance/resonance
/// pair; the controller is a lead filter with a first-order roll-off. Both
/// are discretized by matched pole-zero mapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateParams {
    pub mass: f64,
    pub antiresonance_hz: f64,
    pub antiresonance_damping: f64,
    pub resonance_hz: f64,
    pub resonance_damping: f64,
    /// Target crossover frequency of the loop.
    pub bandwidth_hz: f64,
    /// Lead zero at `bandwidth / ratio`, lead pole at `bandwidth * ratio`.
    pub lead_ratio: f64,
    pub rolloff_hz: f64,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        Self {
            mass: 10.0,
            antiresonance_hz: 110.0,
            antiresonance_damping: 0.03,
            resonance_hz: 150.0,
            resonance_damping: 0.02,
            bandwidth_hz: 30.0,
            lead_ratio: 3.0,
            rolloff_hz: 300.0,
        }
    }
}

impl SurrogateParams {
    pub fn validate(&self, sample_period: f64) -> Result<()> {
        let nyquist = 0.5 / sample_period;
        let positive = [
            ("mass", self.mass),
            ("antiresonance_hz", self.antiresonance_hz),
            ("resonance_hz", self.resonance_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("rolloff_hz", self.rolloff_hz),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("antiresonance_damping", self.antiresonance_damping),
            ("resonance_damping", self.resonance_damping),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        if !(self.lead_ratio.is_finite() && self.lead_ratio >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "lead_ratio must be at least 1, got {}",
                self.lead_ratio
            )));
        }
        let top = self
            .resonance_hz
            .max(self.antiresonance_hz)
            .max(self.rolloff_hz)
            .max(self.bandwidth_hz * self.lead_ratio);
        if top >= nyquist {
            return Err(Error::InvalidParameter(format!(
                "surrogate frequencies must stay below Nyquist ({nyquist} Hz), got {top} Hz"
            )));
        }
        Ok(())
    }

    /// Continuous-time plant response at `s`.
    fn plant_ct(&self, s: Complex<f64>) -> Complex<f64> {
        let wz = 2.0 * PI * self.antiresonance_hz;
        let wp = 2.0 * PI * self.resonance_hz;
        let zero = s * s + s * (2.0 * self.antiresonance_damping * wz) + wz * wz;
        let pole = s * s + s * (2.0 * self.resonance_damping * wp) + wp * wp;
        zero * (wp * wp / (wz * wz)) / (s * s * pole * self.mass)
    }

    fn crossover(&self) -> f64 {
        2.0 * PI * self.bandwidth_hz
    }

    /// Continuous-time controller response at `s`.
    fn controller_ct(&self, s: Complex<f64>) -> Complex<f64> {
        let wc = self.crossover();
        let k = self.mass * wc * wc / self.lead_ratio;
        let lead = (s / (wc / self.lead_ratio) + 1.0) / (s / (wc * self.lead_ratio) + 1.0);
        let rolloff = 1.0 / (s / (2.0 * PI * self.rolloff_hz) + 1.0);
        lead * rolloff * k
    }

    /// Discrete plant `G` with a one-sample delay.
    pub fn plant(&self, sample_period: f64) -> Result<TransferFunction> {
        self.validate(sample_period)?;
        let wz = 2.0 * PI * self.antiresonance_hz;
        let wp = 2.0 * PI * self.resonance_hz;
        let num = pair_factor(self.antiresonance_damping, wz, sample_period);
        let den = crate::lti::poly::convolve(
            &crate::lti::poly::convolve(&[1.0, -1.0], &[1.0, -1.0]),
            &pair_factor(self.resonance_damping, wp, sample_period),
        );
        let raw = TransferFunction::with_delay(num, den, 1, sample_period)?;
        Ok(match_gain(raw, |s| self.plant_ct(s), 10.0, sample_period))
    }

    /// Discrete controller `C` (biproper).
    pub fn controller(&self, sample_period: f64) -> Result<TransferFunction> {
        self.validate(sample_period)?;
        let wc = self.crossover();
        let num = real_factor(wc / self.lead_ratio, sample_period);
        let den = crate::lti::poly::convolve(
            &real_factor(wc * self.lead_ratio, sample_period),
            &real_factor(2.0 * PI * self.rolloff_hz, sample_period),
        );
        let raw = TransferFunction::new(num, den, sample_period)?;
        Ok(match_gain(raw, |s| self.controller_ct(s), self.bandwidth_hz, sample_period))
    }

    /// `G`, `C` and the closed loop they form.
    pub fn build(&self, sample_period: f64) -> Result<SurrogateLoop> {
        let g = self.plant(sample_period)?;
        let c = self.controller(sample_period)?;
        let closed = feedback_connect(&g, &c)?;
        if !closed.closed_loop_stable {
            return Err(Error::InvalidParameter(
                "surrogate parameters give an unstable closed loop".into(),
            ));
        }
        Ok(SurrogateLoop { g, c, closed })
    }
}

#[derive(Debug, Clone)]
pub struct SurrogateLoop {
    pub g: TransferFunction,
    pub c: TransferFunction,
    pub closed: FeedbackLoop,
}

/// `1 - 2 Re(p) x + |p|^2 x^2` for the mapped pair of `s^2 + 2 zeta w s + w^2`.
fn pair_factor(zeta: f64, w: f64, ts: f64) -> Vec<f64> {
    let re = -zeta * w;
    let im = w * (1.0 - zeta * zeta).sqrt();
    let p = Complex::new(re, im).scale(ts).exp();
    vec![1.0, -2.0 * p.re, p.norm_sqr()]
}

/// `1 - e^{-w T} x` for a real root at `s = -w`.
fn real_factor(w: f64, ts: f64) -> Vec<f64> {
    vec![1.0, -(-w * ts).exp()]
}

fn match_gain(
    sys: TransferFunction,
    continuous: impl Fn(Complex<f64>) -> Complex<f64>,
    at_hz: f64,
    ts: f64,
) -> TransferFunction {
    let w = 2.0 * PI * at_hz;
    let target = continuous(Complex::new(0.0, w)).norm();
    let actual = sys.evaluate(w * ts).map(|v| v.norm()).unwrap_or(f64::INFINITY);
    sys.scale(target / actual)
}

/// Everything a trial needs: the true closed-loop map, the learner's model,
/// the noise filter and the reference seen in the error channel.
#[derive(Debug, Clone)]
pub struct PlantSetup {
    /// True map `J_o` from command to error.
    pub true_system: TransferFunction,
    /// Model `J` used by the learner.
    pub model: TransferFunction,
    model_lifted: OnceLock<LiftedOperator>,
    /// Noise shaping filter `H`.
    pub noise_filter: TransferFunction,
    /// Variance of the white noise driving `H`.
    pub noise_variance: f64,
    /// Repeating disturbance in the error channel.
    pub reference: Vec<f64>,
    pub sample_period: f64,
}

impl PlantSetup {
    pub fn new(
        true_system: TransferFunction,
        model: TransferFunction,
        noise_filter: TransferFunction,
        noise_variance: f64,
        reference: Vec<f64>,
    ) -> Result<Self> {
        let n = reference.len();
        if n == 0 {
            return Err(Error::InvalidParameter("reference must not be empty".into()));
        }
        check_finite(&reference, "reference")?;
        if !true_system.is_causal() || !true_system.is_stable() {
            return Err(Error::InvalidParameter("true system must be causal and stable".into()));
        }
        if !noise_filter.is_causal() {
            return Err(Error::NonCausal {
                advance: -noise_filter.delay(),
            });
        }
        if !(noise_variance.is_finite() && noise_variance >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be non-negative, got {noise_variance}"
            )));
        }
        if !model.is_causal() {
            return Err(Error::NonCausal { advance: -model.delay() });
        }
        Ok(Self {
            sample_period: true_system.sample_period(),
            true_system,
            model,
            model_lifted: OnceLock::new(),
            noise_filter,
            noise_variance,
            reference,
        })
    }

    /// Lifted model, computed on first use.
    pub fn model_lifted(&self) -> &LiftedOperator {
        self.model_lifted
            .get_or_init(|| lift(&self.model, self.len()).expect("model checked causal"))
    }

    pub fn len(&self) -> usize {
        self.reference.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reference.is_empty()
    }

    /// Whether `H` is monic and stable.
    ///
    /// `H = S` of a loop around a rigid body has zeros on the unit circle, so
    /// its inverse is only marginally stable.
    pub fn noise_filter_is_monic_stable(&self) -> bool {
        let h = &self.noise_filter;
        h.delay() == 0 && (h.numerator()[0] - 1.0).abs() < 1e-12 && h.is_stable()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{linf_norm, FrequencyGrid};

    #[test]
    fn default_surrogate_loop() {
        let ts = 1e-3;
        let lp = SurrogateParams::default().build(ts).unwrap();
        let s = &lp.closed.sensitivity;
        let j = &lp.closed.process_sensitivity;
        assert!(lp.closed.closed_loop_stable);
        assert_eq!(j.delay(), 1);
        assert!(j.is_minimum_phase());
        let grid = FrequencyGrid::default();
        let smax = linf_norm(s, &grid);
        assert!(smax > 1.2 && smax < 2.5, "{smax}");
        // monic sensitivity
        assert!((s.numerator()[0] - 1.0).abs() < 1e-12 && s.delay() == 0);
        // loop gain crosses one close to the design bandwidth
        let l = lp.g.series(&lp.c);
        let hz: Vec<f64> = grid.to_hz(ts);
        let cross = grid
            .omega()
            .iter()
            .zip(&hz)
            .find(|(w, _)| l.evaluate(**w).unwrap().norm() < 1.0)
            .map(|(_, f)| *f)
            .unwrap();
        assert!((cross - 30.0).abs() < 5.0, "{cross}");
    }

    #[test]
    fn gains_match_continuous_design() {
        let p = SurrogateParams::default();
        let ts = 1e-3;
        let g = p.plant(ts).unwrap();
        let w = 2.0 * PI * 10.0;
        let ct = p.plant_ct(Complex::new(0.0, w)).norm();
        assert!((g.evaluate(w * ts).unwrap().norm() - ct).abs() < 1e-12 * ct);
        // rigid body: |G| ~ 1 / (m w^2) well below the resonances
        assert!((ct * p.mass * w * w - 1.0).abs() < 0.02);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let p = SurrogateParams {
            resonance_hz: 600.0,
            ..Default::default()
        };
        assert!(p.plant(1e-3).is_err());
        let p = SurrogateParams {
            mass: 0.0,
            ..Default::default()
        };
        assert!(p.build(1e-3).is_err());
    }
}
