use nalgebra::Complex;

use super::poly;
use crate::error::{check_finite, Error, Result};

/// Rational discrete-time SISO system
///
/// `H(z) = z^-delay * (b0 + b1 z^-1 + ...) / (a0 + a1 z^-1 + ...)`
///
/// The denominator is normalized so that `a0 = 1`. A negative `delay` is a
/// pure advance and makes the system non-causal; the rational part itself is
/// always causal. Leading zeros of the numerator are absorbed into `delay`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    num: Vec<f64>,
    den: Vec<f64>,
    delay: i64,
    sample_period: f64,
}

/// Sensitivity and process sensitivity of a feedback loop.
#[derive(Debug, Clone)]
pub struct FeedbackLoop {
    /// `S = 1 / (1 + GC)`.
    pub sensitivity: TransferFunction,
    /// `SG = G / (1 + GC)`.
    pub process_sensitivity: TransferFunction,
    pub closed_loop_stable: bool,
}

impl TransferFunction {
    pub fn new(num: Vec<f64>, den: Vec<f64>, sample_period: f64) -> Result<Self> {
        Self::with_delay(num, den, 0, sample_period)
    }

    pub fn with_delay(
        num: Vec<f64>,
        den: Vec<f64>,
        delay: i64,
        sample_period: f64,
    ) -> Result<Self> {
        check_finite(&num, "numerator")?;
        check_finite(&den, "denominator")?;
        if !(sample_period.is_finite() && sample_period > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sample period must be positive, got {sample_period}"
            )));
        }
        if num.is_empty() || den.is_empty() {
            return Err(Error::InvalidParameter(
                "numerator and denominator need at least one coefficient".into(),
            ));
        }
        let den_shift = poly::leading_zeros(&den);
        if den_shift == den.len() {
            return Err(Error::InvalidParameter("denominator is identically zero".into()));
        }
        let num_shift = poly::leading_zeros(&num);
        if num_shift == num.len() {
            return Ok(Self::zero(sample_period));
        }
        let lead = den[den_shift];
        let den: Vec<f64> = den[den_shift..].iter().map(|a| a / lead).collect();
        let num: Vec<f64> = num[num_shift..].iter().map(|b| b / lead).collect();
        Ok(Self {
            num: poly::trim(num),
            den: poly::trim(den),
            delay: delay + num_shift as i64 - den_shift as i64,
            sample_period,
        })
    }

    pub fn gain(k: f64, sample_period: f64) -> Self {
        Self::with_delay(vec![k], vec![1.0], 0, sample_period)
            .expect("static gain with positive sample period")
    }

    pub fn zero(sample_period: f64) -> Self {
        Self {
            num: vec![0.0],
            den: vec![1.0],
            delay: 0,
            sample_period,
        }
    }

    /// `z^-samples`; negative values give a pure advance.
    pub fn delay_by(samples: i64, sample_period: f64) -> Self {
        Self::with_delay(vec![1.0], vec![1.0], samples, sample_period)
            .expect("pure delay with positive sample period")
    }

    pub fn numerator(&self) -> &[f64] {
        &self.num
    }

    pub fn denominator(&self) -> &[f64] {
        &self.den
    }

    pub fn delay(&self) -> i64 {
        self.delay
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn is_zero(&self) -> bool {
        self.num.iter().all(|b| *b == 0.0)
    }

    pub fn is_causal(&self) -> bool {
        self.delay >= 0 || self.is_zero()
    }

    /// True iff every pole lies strictly inside the unit circle.
    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.norm() < 1.0)
    }

    /// True iff every finite zero lies strictly inside the unit circle.
    pub fn is_minimum_phase(&self) -> bool {
        self.zeros().iter().all(|z| z.norm() < 1.0)
    }

    pub fn poles(&self) -> Vec<Complex<f64>> {
        poly::roots(&self.den)
    }

    pub fn zeros(&self) -> Vec<Complex<f64>> {
        if self.is_zero() {
            return Vec::new();
        }
        poly::roots(&self.num)
    }

    /// The same system with the pure delay removed.
    pub fn rational_part(&self) -> Self {
        Self {
            delay: 0,
            ..self.clone()
        }
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::with_delay(
            self.num.iter().map(|b| b * k).collect(),
            self.den.clone(),
            self.delay,
            self.sample_period,
        )
        .expect("scaling keeps a valid system")
    }

    /// Series connection `self * other`.
    pub fn series(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero(self.sample_period);
        }
        Self::with_delay(
            poly::convolve(&self.num, &other.num),
            poly::convolve(&self.den, &other.den),
            self.delay + other.delay,
            self.sample_period,
        )
        .expect("product of valid systems")
    }

    /// Parallel connection `self + other`.
    pub fn parallel(&self, other: &Self) -> Self {
        if other.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return other.clone();
        }
        let base = self.delay.min(other.delay);
        let left = poly::convolve(&self.num, &other.den);
        let right = poly::convolve(&other.num, &self.den);
        let num = poly::add_shifted(
            &shift_poly(&left, (self.delay - base) as usize),
            &right,
            (other.delay - base) as usize,
        );
        Self::with_delay(
            num,
            poly::convolve(&self.den, &other.den),
            base,
            self.sample_period,
        )
        .expect("sum of valid systems")
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.parallel(&other.scale(-1.0))
    }

    /// `1 / self`; the result is non-causal when `self` has a delay.
    pub fn inverse(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::InvalidParameter("cannot invert the zero system".into()));
        }
        Self::with_delay(
            self.den.clone(),
            self.num.clone(),
            -self.delay,
            self.sample_period,
        )
    }

    /// Frequency response at `omega` rad/sample. Returns `None` when the
    /// denominator vanishes on the unit circle.
    pub fn evaluate(&self, omega: f64) -> Option<Complex<f64>> {
        let zinv = Complex::from_polar(1.0, -omega);
        let den = poly::horner(&self.den, zinv);
        let scale: f64 = self.den.iter().map(|a| a.abs()).sum();
        if den.norm() <= 1e-13 * scale {
            return None;
        }
        let num = poly::horner(&self.num, zinv);
        Some(Complex::from_polar(1.0, -omega * self.delay as f64) * num / den)
    }

    /// Zero-state response to `input`, evaluated by the difference equation.
    pub fn simulate(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_finite(input, "simulation input")?;
        if !self.is_causal() {
            return Err(Error::NonCausal {
                advance: -self.delay,
            });
        }
        let n = input.len();
        let d = self.delay.max(0) as usize;
        let mut out = vec![0.0; n];
        for t in 0..n {
            let mut acc = 0.0;
            for (k, &b) in self.num.iter().enumerate() {
                let lag = k + d;
                if lag > t {
                    break;
                }
                acc += b * input[t - lag];
            }
            for (k, &a) in self.den.iter().enumerate().skip(1) {
                if k > t {
                    break;
                }
                acc -= a * out[t - k];
            }
            out[t] = acc;
        }
        Ok(out)
    }

    pub fn impulse_response(&self, len: usize) -> Result<Vec<f64>> {
        let mut impulse = vec![0.0; len];
        if let Some(first) = impulse.first_mut() {
            *first = 1.0;
        }
        self.simulate(&impulse)
    }

    /// Closes the loop `C` around `G` (negative feedback) without any pole-zero
    /// cancellation.
    pub fn feedback_connect(plant: &Self, controller: &Self) -> Result<FeedbackLoop> {
        let ts = plant.sample_period;
        if plant.is_zero() || controller.is_zero() {
            return Ok(FeedbackLoop {
                sensitivity: Self::gain(1.0, ts),
                process_sensitivity: if plant.is_zero() {
                    Self::zero(ts)
                } else {
                    plant.clone()
                },
                closed_loop_stable: plant.is_stable(),
            });
        }
        let loop_gain = plant.series(controller);
        let loop_delay = loop_gain.delay;
        // 1 + L written over a common power of z^-1
        let base = loop_delay.min(0);
        let den_part = shift_poly(&loop_gain.den, (0 - base) as usize);
        let closed_den = poly::add_shifted(&den_part, &loop_gain.num, (loop_delay - base) as usize);
        let scale: f64 = den_part.iter().chain(loop_gain.num.iter()).map(|c| c.abs()).sum();
        if closed_den.iter().all(|c| c.abs() <= 1e-14 * scale) {
            return Err(Error::AlgebraicLoop);
        }
        let sensitivity = Self::with_delay(loop_gain.den.clone(), closed_den.clone(), -base, ts)?;
        let process_num = poly::convolve(&plant.num, &controller.den);
        let process_sensitivity =
            Self::with_delay(process_num, closed_den, plant.delay - base, ts)?;
        let closed_loop_stable = sensitivity.is_stable();
        Ok(FeedbackLoop {
            sensitivity,
            process_sensitivity,
            closed_loop_stable,
        })
    }
}

fn shift_poly(p: &[f64], shift: usize) -> Vec<f64> {
    let mut out = vec![0.0; shift];
    out.extend_from_slice(p);
    out
}
