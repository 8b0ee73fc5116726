//! Inversion of the outcome-level depolarizing model against a target
//! average winning probability.

use crate::error::{Error, Result};
use crate::game::quantum_value;

/// Depolarizing weight that brings the ideal strategy's average winning
/// probability down to `target`: the model is affine,
/// `p(λ) = (1 − λ)·cos²(π/8) + λ/2`.
pub fn fit_lambda(target: f64) -> Result<f64> {
    let ideal = quantum_value();
    // Accept the endpoints despite rounding in the caller's value of cos²(π/8).
    let slack = 1e-12;
    if !target.is_finite() || target < 0.5 - slack || target > ideal + slack {
        return Err(Error::Unfittable(target));
    }
    Ok(((ideal - target) / (ideal - 0.5)).clamp(0.0, 1.0))
}

/// Average winning probability the noise model predicts for `lambda`.
pub fn modelled_win_probability(lambda: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain { what: "depolarizing weight", value: lambda });
    }
    Ok((1.0 - lambda) * quantum_value() + lambda * 0.5)
}
