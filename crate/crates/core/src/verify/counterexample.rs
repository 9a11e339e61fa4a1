use std::sync::Arc;

use crate::contracts::{ContractSchedule, ThresholdMechanism, VirtualValuePower};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::numerics::{integrate, GridSpec};
use crate::solver::refined_grid;

/// Envelope payments for q̂₁ = ψ²·1{v₁ ≥ v₁*} with the −ψ threshold second stage.
pub fn counterexample_schedule(model: &Model, grid: &GridSpec) -> Result<ContractSchedule> {
    let rule = VirtualValuePower::squared(model);
    ContractSchedule::new(model, Arc::new(rule), &refined_grid(grid, model.v1_star()))
}

pub fn counterexample_mechanism(model: &Model, grid: &GridSpec) -> Result<ThresholdMechanism> {
    Ok(ThresholdMechanism::new(counterexample_schedule(model, grid)?))
}

/// φ̂(s) = H(−1/ψ(s))(1 − ψ²(s)), the slope deficit of U(s, s) under q̂₁.
/// H is read off the signal at q₁ = 1.
pub fn phi_hat(model: &Model, s: f64) -> f64 {
    let psi = model.psi(s);
    model.signal().cdf(-1.0 / psi, 1.0) * (1.0 - psi * psi)
}

/// (v₁ − r₁)φ̂(r₁) − ∫_{r₁}^{v₁} φ̂: the payoff gap when the deviator keeps
/// the reported type's exercise threshold. Both types must be at least v₁*.
pub fn fixed_threshold_delta(model: &Model, v1: f64, r1: f64) -> Result<f64> {
    let lo = model.v1_star();
    for (what, x) in [("v1", v1), ("r1", r1)] {
        if !(lo..=1.0).contains(&x) {
            return Err(Error::Domain {
                what,
                value: x,
                domain: "[v1*, 1]",
            });
        }
    }
    let area = integrate(|s| phi_hat(model, s), r1, v1, model.quadrature())?;
    Ok((v1 - r1) * phi_hat(model, r1) - area)
}
