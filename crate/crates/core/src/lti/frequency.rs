use std::f64::consts::PI;

use nalgebra::Complex;

use super::TransferFunction;
use crate::error::{Error, Result};

/// Default number of points of the norm-estimation grid.
pub const DEFAULT_GRID_POINTS: usize = 4096;
/// Lowest frequency of the default grid, as a fraction of Nyquist.
pub const DEFAULT_GRID_FLOOR: f64 = 1e-4;

/// Strictly increasing frequencies in `(0, pi]`, in rad/sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    omega: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(omega: Vec<f64>) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::InvalidParameter("empty frequency grid".into()));
        }
        let in_range = omega.iter().all(|w| w.is_finite() && *w > 0.0 && *w <= PI);
        let increasing = omega.windows(2).all(|w| w[0] < w[1]);
        if !(in_range && increasing) {
            return Err(Error::InvalidParameter(
                "frequency grid must be strictly increasing within (0, pi]".into(),
            ));
        }
        Ok(Self { omega })
    }

    /// `points` log-spaced frequencies from `floor * pi` up to `pi`.
    pub fn log_spaced(points: usize, floor: f64) -> Result<Self> {
        if points < 2 || !(floor > 0.0 && floor < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "log grid needs >= 2 points and a floor in (0, 1), got {points} and {floor}"
            )));
        }
        let decades = -floor.log10();
        let omega = (0..points)
            .map(|k| {
                if k + 1 == points {
                    PI
                } else {
                    PI * 10f64.powf(-decades * (1.0 - k as f64 / (points - 1) as f64))
                }
            })
            .collect();
        Self::new(omega)
    }

    /// `bins` equally spaced frequencies `k pi / bins`, `k = 1..=bins`.
    pub fn linear(bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::InvalidParameter("linear grid needs >= 1 bin".into()));
        }
        Self::new((1..=bins).map(|k| PI * k as f64 / bins as f64).collect())
    }

    /// Inserts the geometric midpoint between neighbours; the result contains
    /// every point of `self`.
    pub fn refined(&self) -> Self {
        let mut omega = Vec::with_capacity(2 * self.omega.len());
        for pair in self.omega.windows(2) {
            omega.push(pair[0]);
            omega.push((pair[0] * pair[1]).sqrt());
        }
        omega.push(*self.omega.last().unwrap());
        Self { omega }
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn to_hz(&self, sample_period: f64) -> Vec<f64> {
        self.omega
            .iter()
            .map(|w| w / (2.0 * PI * sample_period))
            .collect()
    }
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        Self::log_spaced(DEFAULT_GRID_POINTS, DEFAULT_GRID_FLOOR).expect("valid default grid")
    }
}

/// Anything with a frequency response on the unit circle.
///
/// Singular frequencies evaluate to an infinite value.
pub trait FrequencyDomain {
    fn response_at(&self, omega: f64) -> Complex<f64>;
}

impl FrequencyDomain for TransferFunction {
    fn response_at(&self, omega: f64) -> Complex<f64> {
        self.evaluate(omega)
            .unwrap_or_else(|| Complex::new(f64::INFINITY, 0.0))
    }
}

impl<T: FrequencyDomain + ?Sized> FrequencyDomain for &T {
    fn response_at(&self, omega: f64) -> Complex<f64> {
        (**self).response_at(omega)
    }
}

/// Pointwise response given by a closure, e.g. a non-rational stationary filter.
pub struct ResponseFn<F>(pub F);

impl<F: Fn(f64) -> Complex<f64>> FrequencyDomain for ResponseFn<F> {
    fn response_at(&self, omega: f64) -> Complex<f64> {
        (self.0)(omega)
    }
}

#[derive(Debug, Clone)]
pub struct FrequencyResponse {
    pub grid: FrequencyGrid,
    pub values: Vec<Complex<f64>>,
    /// Grid indices where the denominator vanishes.
    pub singular: Vec<usize>,
}

impl FrequencyResponse {
    pub fn magnitude(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Largest magnitude on the grid; infinite when any point is singular.
    ///
    /// A grid maximum is a lower bound of the true L-infinity norm.
    pub fn peak(&self) -> (f64, f64) {
        if let Some(&k) = self.singular.first() {
            return (f64::INFINITY, self.grid.omega()[k]);
        }
        self.values
            .iter()
            .zip(self.grid.omega())
            .fold((0.0, self.grid.omega()[0]), |(best, at), (v, &w)| {
                let m = v.norm();
                if m > best {
                    (m, w)
                } else {
                    (best, at)
                }
            })
    }
}

pub fn frequency_response<S: FrequencyDomain + ?Sized>(
    sys: &S,
    grid: &FrequencyGrid,
) -> FrequencyResponse {
    let values: Vec<Complex<f64>> = grid.omega().iter().map(|&w| sys.response_at(w)).collect();
    let singular = values
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.re.is_finite() || !v.im.is_finite())
        .map(|(k, _)| k)
        .collect();
    FrequencyResponse {
        grid: grid.clone(),
        values,
        singular,
    }
}

/// Grid estimate (lower bound) of the L-infinity norm.
pub fn linf_norm<S: FrequencyDomain + ?Sized>(sys: &S, grid: &FrequencyGrid) -> f64 {
    frequency_response(sys, grid).peak().0
}

#[cfg(test)]
mod tests {
    use super::*;

    const TS: f64 = 1e-3;

    #[test]
    fn default_grid_shape() {
        let grid = FrequencyGrid::default();
        assert_eq!(grid.len(), DEFAULT_GRID_POINTS);
        assert_eq!(*grid.omega().last().unwrap(), PI);
        assert!((grid.omega()[0] - PI * 1e-4).abs() < 1e-15);
    }

    #[test]
    fn grid_rejects_bad_values() {
        assert!(FrequencyGrid::new(vec![0.0, 1.0]).is_err());
        assert!(FrequencyGrid::new(vec![1.0, 0.5]).is_err());
        assert!(FrequencyGrid::new(vec![1.0, 4.0]).is_err());
    }

    #[test]
    fn refined_grid_is_nested() {
        let coarse = FrequencyGrid::log_spaced(17, 1e-3).unwrap();
        let fine = coarse.refined();
        assert_eq!(fine.len(), 33);
        for w in coarse.omega() {
            assert!(fine.omega().contains(w));
        }
    }

    #[test]
    fn gain_response_is_flat() {
        let sys = TransferFunction::gain(0.7, TS);
        let grid = FrequencyGrid::log_spaced(64, 1e-3).unwrap();
        let fr = frequency_response(&sys, &grid);
        assert!(fr.values.iter().all(|v| (v - Complex::new(0.7, 0.0)).norm() < 1e-15));
        assert!((linf_norm(&sys, &grid) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn delay_response_is_a_phasor() {
        let sys = TransferFunction::delay_by(1, TS);
        for w in [0.01, 0.5, 2.0, PI] {
            let v = sys.response_at(w);
            assert!((v - Complex::from_polar(1.0, -w)).norm() < 1e-15);
        }
        assert!((linf_norm(&sys, &FrequencyGrid::default()) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn first_order_lowpass_peaks_at_dc() {
        let sys = TransferFunction::new(vec![1.0], vec![1.0, -0.5], TS).unwrap();
        // |1 / (1 - 0.5 e^{-iw})| -> 2 as w -> 0
        assert!((sys.response_at(1e-9).norm() - 2.0).abs() < 1e-9);
        let norm = linf_norm(&sys, &FrequencyGrid::default());
        assert!(norm <= 2.0 && norm > 2.0 - 1e-6);
    }

    #[test]
    fn integrator_is_singular_at_dc() {
        let sys = TransferFunction::new(vec![1.0], vec![1.0, -1.0], TS).unwrap();
        assert!(sys.evaluate(0.0).is_none());
        let grid = FrequencyGrid::new(vec![1e-20, 1.0]).unwrap();
        let fr = frequency_response(&sys, &grid);
        assert_eq!(fr.singular, vec![0]);
        assert_eq!(linf_norm(&sys, &grid), f64::INFINITY);
    }
}
