use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};

/// Point-to-point move with a trapezoidal velocity profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionProfile {
    /// Signed travel in meters.
    pub distance: f64,
    pub max_velocity: f64,
    pub max_acceleration: f64,
    /// Time at which the move starts, in seconds.
    pub start_time: f64,
}

impl Default for MotionProfile {
    /// 60 mm at 0.25 m/s: constant velocity from 0.03 s to 0.24 s.
    fn default() -> Self {
        Self {
            distance: 0.06,
            max_velocity: 0.25,
            max_acceleration: 25.0 / 3.0,
            start_time: 0.0,
        }
    }
}

impl MotionProfile {
    /// `(acceleration time, constant-velocity time, peak velocity)`.
    pub fn timing(&self) -> Result<(f64, f64, f64)> {
        let d = self.distance.abs();
        if d == 0.0 {
            return Ok((0.0, 0.0, 0.0));
        }
        let (v, a) = (self.max_velocity, self.max_acceleration);
        if !(v.is_finite() && v > 0.0 && a.is_finite() && a > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "velocity and acceleration limits must be positive, got {v} and {a}"
            )));
        }
        let peak = v.min((d * a).sqrt());
        let t_acc = peak / a;
        let t_const = (d - peak * t_acc) / peak;
        Ok((t_acc, t_const.max(0.0), peak))
    }

    pub fn duration(&self) -> Result<f64> {
        let (ta, tc, _) = self.timing()?;
        Ok(2.0 * ta + tc)
    }

    fn position(&self, t: f64, ta: f64, tc: f64, peak: f64) -> f64 {
        let a = peak / ta;
        let tau = t - self.start_time;
        let x = if tau <= 0.0 {
            0.0
        } else if tau <= ta {
            0.5 * a * tau * tau
        } else if tau <= ta + tc {
            0.5 * peak * ta + peak * (tau - ta)
        } else if tau <= 2.0 * ta + tc {
            let rest = 2.0 * ta + tc - tau;
            self.distance.abs() - 0.5 * a * rest * rest
        } else {
            self.distance.abs()
        };
        x * self.distance.signum()
    }
}

/// Samples the position profile at `t = k T`, `k = 0..n`.
pub fn build_reference(profile: &MotionProfile, n: usize, sample_period: f64) -> Result<Vec<f64>> {
    if n == 0 || !(sample_period.is_finite() && sample_period > 0.0) {
        return Err(Error::InvalidParameter("reference needs N >= 1 and a positive sample period".into()));
    }
    check_finite(&[profile.distance, profile.start_time], "motion profile")?;
    if profile.distance == 0.0 {
        return Ok(vec![0.0; n]);
    }
    if profile.start_time < 0.0 {
        return Err(Error::InvalidParameter("start time must be non-negative".into()));
    }
    let (ta, tc, peak) = profile.timing()?;
    let end = profile.start_time + 2.0 * ta + tc;
    let horizon = (n - 1) as f64 * sample_period;
    if end > horizon + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "move ends at {end:.4} s, beyond the task horizon of {horizon:.4} s"
        )));
    }
    Ok((0..n)
        .map(|k| profile.position(k as f64 * sample_period, ta, tc, peak))
        .collect())
}

/// Reference-derivative basis `Psi` with unit infinity-norm columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub psi: DMatrix<f64>,
    pub orders: Vec<usize>,
    /// Infinity norm of each raw derivative column; the raw coefficient of
    /// column `k` is `theta_k / scales[k]`.
    pub scales: Vec<f64>,
    /// Columns that vanish identically.
    pub degenerate: Vec<usize>,
}

impl Basis {
    /// Coefficients for the unnormalized derivative columns.
    pub fn raw_coefficients(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(&self.scales)
            .map(|(t, s)| if *s > 0.0 { t / s } else { 0.0 })
            .collect()
    }
}

/// Column for order `k` is the `k`-th backward difference of `r` divided by
/// `T^k` and advanced by `ceil(k/2)` samples, so that it is roughly centered.
/// Samples outside the task hold the end values.
pub fn build_basis(r: &[f64], orders: &[usize], sample_period: f64) -> Result<Basis> {
    let n = r.len();
    check_finite(r, "reference")?;
    if orders.is_empty() {
        return Err(Error::InvalidParameter("at least one basis order is required".into()));
    }
    let mut psi = DMatrix::zeros(n, orders.len());
    let mut scales = Vec::with_capacity(orders.len());
    let mut degenerate = Vec::new();
    for (col, &k) in orders.iter().enumerate() {
        if !(1..=8).contains(&k) {
            return Err(Error::InvalidParameter(format!("basis order {k} outside 1..=8")));
        }
        if k >= n {
            return Err(Error::InvalidParameter(format!("basis order {k} needs N > {k}, got N = {n}")));
        }
        let shift = k.div_ceil(2) as i64;
        let at = |i: i64| r[i.clamp(0, n as i64 - 1) as usize];
        let binom = binomials(k);
        let raw: Vec<f64> = (0..n as i64)
            .map(|t| {
                let s: f64 = binom
                    .iter()
                    .enumerate()
                    .map(|(m, c)| c * at(t + shift - m as i64))
                    .sum();
                s / sample_period.powi(k as i32)
            })
            .collect();
        let scale = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // differences of a constant leave rounding-level residue
        let level = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale <= 1e-12 * level.max(f64::MIN_POSITIVE) / sample_period.powi(k as i32) {
            degenerate.push(col);
            scales.push(0.0);
            continue;
        }
        for (t, v) in raw.iter().enumerate() {
            psi[(t, col)] = v / scale;
        }
        scales.push(scale);
    }
    Ok(Basis {
        psi,
        orders: orders.to_vec(),
        scales,
        degenerate,
    })
}

/// Signed binomial coefficients of the `k`-th backward difference.
fn binomials(k: usize) -> Vec<f64> {
    let mut c = vec![1.0];
    for _ in 0..k {
        let mut next = vec![0.0; c.len() + 1];
        for (i, v) in c.iter().enumerate() {
            next[i] += v;
            next[i + 1] -= v;
        }
        c = next;
    }
    c
}
