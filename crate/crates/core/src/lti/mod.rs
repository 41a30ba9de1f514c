//! Discrete-time LTI systems: simulation, frequency response and finite-time lifting.
//!
//! All signals are scalar and start from zero initial conditions.

mod frequency;
mod lifted;
pub(crate) mod poly;
mod transfer_function;

pub use frequency::{
    frequency_response, linf_norm, FrequencyDomain, FrequencyGrid, FrequencyResponse, ResponseFn,
    DEFAULT_GRID_FLOOR, DEFAULT_GRID_POINTS,
};
pub use lifted::{lift, lift_noncausal, LiftedOperator};
pub use transfer_function::{FeedbackLoop, TransferFunction};

/// Zero-state response of `sys` to `input`.
pub fn simulate(sys: &TransferFunction, input: &[f64]) -> crate::Result<Vec<f64>> {
    sys.simulate(input)
}

pub fn impulse_response(sys: &TransferFunction, len: usize) -> crate::Result<Vec<f64>> {
    sys.impulse_response(len)
}

/// Returns `(S, SG)` for plant `g` under feedback controller `c`, with a
/// closed-loop stability flag.
pub fn feedback_connect(
    g: &TransferFunction,
    c: &TransferFunction,
) -> crate::Result<FeedbackLoop> {
    TransferFunction::feedback_connect(g, c)
}
