//! Frequency-domain predictions for explicit learning loops and spectrum
//! estimation from simulated trials.
//!
//! Spectra are one-sided in `(0, pi]` but normalized per rad/sample over the
//! full circle, so white noise of variance `s2` has the flat value `s2 / (2 pi)`.
//! Reference and disturbance contributions are added, i.e. `r` and `v_j` are
//! taken to be uncorrelated.

mod convergence;
mod spectra;

pub use convergence::{
    convergence_factor, lifted_contraction_factor, noise_amplification, ConvergenceReport,
    NoiseAmplification, StationaryFilter, StationaryNormOptimal, Verdict,
};
pub use spectra::{
    band_average_ratio, default_segment_len, estimate_spectrum, finite_iteration_coefficients,
    finite_iteration_spectrum, limit_error_coefficients, limit_error_spectrum, theoretical_phi_v,
    welch_grid, Band, SpectrumCoefficients, SpectrumEstimate, SpectrumMethod,
};
