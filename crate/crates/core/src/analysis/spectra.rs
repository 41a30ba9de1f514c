use std::f64::consts::PI;

use nalgebra::Complex;
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::convergence::{check_grid_len, convergence_factor, loop_point};
use crate::error::{check_finite, Error, Result};
use crate::lti::{FrequencyDomain, FrequencyGrid, TransferFunction};

/// How a spectrum was obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumMethod {
    Theoretical,
    /// Hann-windowed periodograms averaged over segments and signals.
    Welch {
        segment_len: usize,
        overlap: f64,
        segments: usize,
        signals: usize,
    },
}

/// Power per rad/sample on a grid in `(0, pi]`.
///
/// Unit-variance white noise has the flat value `1 / (2 pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate {
    pub grid: FrequencyGrid,
    pub power: Vec<f64>,
    pub method: SpectrumMethod,
}

impl SpectrumEstimate {
    pub fn theoretical(grid: FrequencyGrid, power: Vec<f64>) -> Result<Self> {
        check_grid_len(&grid, &power, "spectrum")?;
        if power.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidParameter("spectral power must be non-negative".into()));
        }
        Ok(Self {
            grid,
            power,
            method: SpectrumMethod::Theoretical,
        })
    }

    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    pub fn freq_hz(&self, sample_period: f64) -> Vec<f64> {
        self.grid.to_hz(sample_period)
    }

    /// Pointwise `factor[k] * power[k]`.
    pub fn scaled(&self, factor: &[f64]) -> Result<Self> {
        check_grid_len(&self.grid, factor, "spectrum scaling")?;
        Ok(Self {
            grid: self.grid.clone(),
            power: self.power.iter().zip(factor).map(|(p, f)| p * f).collect(),
            method: SpectrumMethod::Theoretical,
        })
    }

    /// Two-sided integral of the spectrum, i.e. the signal variance, for a
    /// Welch estimate on the uniform bin grid.
    pub fn integrated_power(&self) -> f64 {
        let w = self.grid.omega();
        let step = if w.len() > 1 { w[1] - w[0] } else { w[0] };
        let last = self.power.len() - 1;
        self.power
            .iter()
            .enumerate()
            .map(|(k, p)| if k == last && (w[k] - PI).abs() < 1e-12 { *p } else { 2.0 * p })
            .sum::<f64>()
            * step
    }
}

/// Largest power of two not above `n / 4`, and at least 2.
pub fn default_segment_len(n: usize) -> usize {
    let quarter = (n / 4).max(2);
    1 << (usize::BITS - 1 - quarter.leading_zeros())
}

/// Welch estimate with a Hann window and 50% overlap.
///
/// `segment_len` defaults to [`default_segment_len`] of the shortest signal.
/// The grid holds the bins `2 pi k / segment_len`, `k = 1..=segment_len/2`.
pub fn estimate_spectrum<S: AsRef<[f64]> + Sync>(signals: &[S], segment_len: Option<usize>) -> Result<SpectrumEstimate> {
    if signals.is_empty() {
        return Err(Error::InvalidParameter("spectrum estimation needs at least one signal".into()));
    }
    let shortest = signals.iter().map(|s| s.as_ref().len()).min().unwrap();
    let seg = segment_len.unwrap_or_else(|| default_segment_len(shortest));
    if seg < 2 || seg > shortest {
        return Err(Error::InvalidParameter(format!(
            "segment length {seg} must lie in [2, {shortest}] (shortest signal)"
        )));
    }
    for s in signals {
        check_finite(s.as_ref(), "spectrum input")?;
    }
    let step = seg / 2;
    let window: Vec<f64> = (0..seg)
        .map(|t| 0.5 - 0.5 * (2.0 * PI * t as f64 / seg as f64).cos())
        .collect();
    let energy: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(seg);
    let bins = seg / 2;

    let (sum, count) = signals
        .par_iter()
        .map(|s| {
            let x = s.as_ref();
            let mut acc = vec![0.0; bins];
            let mut buf = vec![Complex::new(0.0, 0.0); seg];
            let mut segments = 0usize;
            let mut start = 0;
            while start + seg <= x.len() {
                for t in 0..seg {
                    buf[t] = Complex::new(x[start + t] * window[t], 0.0);
                }
                fft.process(&mut buf);
                for (k, a) in acc.iter_mut().enumerate() {
                    *a += buf[k + 1].norm_sqr();
                }
                segments += 1;
                start += step;
            }
            (acc, segments)
        })
        .reduce(
            || (vec![0.0; bins], 0),
            |(mut a, na), (b, nb)| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                (a, na + nb)
            },
        );
    let norm = 1.0 / (2.0 * PI * energy * count as f64);
    Ok(SpectrumEstimate {
        grid: welch_grid(seg)?,
        power: sum.into_iter().map(|p| p * norm).collect(),
        method: SpectrumMethod::Welch {
            segment_len: seg,
            overlap: 0.5,
            segments: count,
            signals: signals.len(),
        },
    })
}

/// Bin frequencies of a Welch estimate with segment length `seg`.
pub fn welch_grid(seg: usize) -> Result<FrequencyGrid> {
    FrequencyGrid::new((1..=seg / 2).map(|k| 2.0 * PI * k as f64 / seg as f64).collect())
}

/// `|H|^2 lambda_e / (2 pi)` for white noise of variance `lambda_e` filtered by `H`.
pub fn theoretical_phi_v(h: &TransferFunction, noise_variance: f64, grid: &FrequencyGrid) -> Result<SpectrumEstimate> {
    if !(noise_variance.is_finite() && noise_variance >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise variance must be non-negative, got {noise_variance}"
        )));
    }
    let power = grid
        .omega()
        .iter()
        .map(|&w| h.response_at(w).norm_sqr() * noise_variance / (2.0 * PI))
        .collect();
    SpectrumEstimate::theoretical(grid.clone(), power)
}

/// Pointwise coefficients of `phi_r` and `phi_v` in an error spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumCoefficients {
    pub reference: Vec<f64>,
    pub noise: Vec<f64>,
}

impl SpectrumCoefficients {
    pub fn combine(&self, phi_r: &[f64], phi_v: &[f64]) -> Vec<f64> {
        self.reference
            .iter()
            .zip(&self.noise)
            .zip(phi_r.iter().zip(phi_v))
            .map(|((a, b), (r, v))| a * r + b * v)
            .collect()
    }
}

/// Coefficients of the converged error spectrum of `f_{j+1} = Q (f_j + L e_j)`.
///
/// Requires a grid contraction factor below one.
pub fn limit_error_coefficients<Q, L, J>(q: &Q, l: &L, j: &J, grid: &FrequencyGrid) -> Result<SpectrumCoefficients>
where
    Q: FrequencyDomain + ?Sized,
    L: FrequencyDomain + ?Sized,
    J: FrequencyDomain + ?Sized,
{
    let report = convergence_factor(q, l, j, grid);
    if !(report.rho_hat < 1.0) {
        return Err(Error::NotContractive { factor: report.rho_hat });
    }
    let one = Complex::new(1.0, 0.0);
    let (reference, noise) = grid
        .omega()
        .iter()
        .map(|&w| {
            let p = loop_point(q, l, j, w);
            let r = ((one - p.q) / (one - p.x)).norm_sqr();
            let v = 1.0 + p.jql.norm_sqr() / (1.0 - p.x.norm_sqr());
            (r, v)
        })
        .unzip();
    Ok(SpectrumCoefficients { reference, noise })
}

/// Coefficients of the error spectrum after `trials` updates from `f_0 = 0`.
pub fn finite_iteration_coefficients<Q, L, J>(
    trials: usize,
    q: &Q,
    l: &L,
    j: &J,
    grid: &FrequencyGrid,
) -> Result<SpectrumCoefficients>
where
    Q: FrequencyDomain + ?Sized,
    L: FrequencyDomain + ?Sized,
    J: FrequencyDomain + ?Sized,
{
    let one = Complex::new(1.0, 0.0);
    let mut reference = Vec::with_capacity(grid.len());
    let mut noise = Vec::with_capacity(grid.len());
    for &w in grid.omega() {
        let p = loop_point(q, l, j, w);
        let jv = j.response_at(w);
        let lv = l.response_at(w);
        let sum = geometric_sum(p.x, trials);
        let r = (one - jv * sum * p.q * lv).norm_sqr();
        let m = p.x.norm_sqr();
        let power_sum = if (1.0 - m).abs() < 1e-12 {
            trials as f64
        } else {
            (1.0 - pow_real(m, trials)) / (1.0 - m)
        };
        let v = 1.0 + p.jql.norm_sqr() * power_sum;
        if !(r.is_finite() && v.is_finite()) {
            return Err(Error::NonFinite("finite-iteration spectrum"));
        }
        reference.push(r);
        noise.push(v);
    }
    Ok(SpectrumCoefficients { reference, noise })
}

/// `sum_{l < n} x^l`.
fn geometric_sum(x: Complex<f64>, n: usize) -> Complex<f64> {
    let one = Complex::new(1.0, 0.0);
    if (one - x).norm() < 1e-12 {
        return Complex::new(n as f64, 0.0);
    }
    (one - pow_complex(x, n)) / (one - x)
}

fn pow_complex(x: Complex<f64>, n: usize) -> Complex<f64> {
    let mut result = Complex::new(1.0, 0.0);
    let mut base = x;
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            result *= base;
        }
        base *= base;
        e >>= 1;
    }
    result
}

fn pow_real(x: f64, n: usize) -> f64 {
    pow_complex(Complex::new(x, 0.0), n).re
}

/// Converged error spectrum for given reference and disturbance spectra on `grid`.
pub fn limit_error_spectrum<Q, L, J>(
    q: &Q,
    l: &L,
    j: &J,
    phi_r: &[f64],
    phi_v: &[f64],
    grid: &FrequencyGrid,
) -> Result<SpectrumEstimate>
where
    Q: FrequencyDomain + ?Sized,
    L: FrequencyDomain + ?Sized,
    J: FrequencyDomain + ?Sized,
{
    check_grid_len(grid, phi_r, "reference spectrum")?;
    check_grid_len(grid, phi_v, "disturbance spectrum")?;
    let c = limit_error_coefficients(q, l, j, grid)?;
    SpectrumEstimate::theoretical(grid.clone(), c.combine(phi_r, phi_v))
}

/// Error spectrum after `trials` updates from `f_0 = 0`.
pub fn finite_iteration_spectrum<Q, L, J>(
    trials: usize,
    q: &Q,
    l: &L,
    j: &J,
    phi_r: &[f64],
    phi_v: &[f64],
    grid: &FrequencyGrid,
) -> Result<SpectrumEstimate>
where
    Q: FrequencyDomain + ?Sized,
    L: FrequencyDomain + ?Sized,
    J: FrequencyDomain + ?Sized,
{
    check_grid_len(grid, phi_r, "reference spectrum")?;
    check_grid_len(grid, phi_v, "disturbance spectrum")?;
    let c = finite_iteration_coefficients(trials, q, l, j, grid)?;
    SpectrumEstimate::theoretical(grid.clone(), c.combine(phi_r, phi_v))
}

/// Frequency band used to summarize a ratio of spectra.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub low_hz: f64,
    pub high_hz: f64,
    /// Lowest grid bins always left out.
    pub skip_bins: usize,
}

impl Default for Band {
    fn default() -> Self {
        Self {
            low_hz: 5.0,
            high_hz: 400.0,
            skip_bins: 5,
        }
    }
}

/// Mean of `num / den` over the bins of `band` where `den > 0`.
pub fn band_average_ratio(
    num: &SpectrumEstimate,
    den: &SpectrumEstimate,
    band: &Band,
    sample_period: f64,
) -> Result<f64> {
    if num.grid != den.grid {
        return Err(Error::InvalidParameter("spectra live on different grids".into()));
    }
    let hz = num.freq_hz(sample_period);
    let ratios: Vec<f64> = (band.skip_bins..num.len())
        .filter(|&k| hz[k] >= band.low_hz && hz[k] <= band.high_hz && den.power[k] > 0.0)
        .map(|k| num.power[k] / den.power[k])
        .collect();
    if ratios.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no usable bins between {} Hz and {} Hz",
            band.low_hz, band.high_hz
        )));
    }
    Ok(ratios.iter().sum::<f64>() / ratios.len() as f64)
}
