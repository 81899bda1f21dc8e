use num_complex::Complex64;

use super::characteristic::characteristic_with_derivative;
use super::distribution::{clip_and_normalize, trapezoid, FourierPlan, GridSpec};
use crate::error::{QfpmeError, Result};
use crate::operators::SuperOperator;
use crate::qfpme::{
    assemble_generator, parameter_derivatives, steady_state_forward, steady_state_forward_auto, steady_state_full,
    HermiteState, ModelSpec,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherOptions {
    /// Hermite truncation; chosen from the tail of the steady state when
    /// absent (feedback-free models) or 24 otherwise.
    pub order: Option<usize>,
    pub points: usize,
    /// Integrand is dropped where `P(D)` is at or below this.
    pub floor: f64,
    pub cutoff: Option<f64>,
    /// Relative change tolerated when refining both `N` and the grid.
    pub refine_tol: f64,
    pub max_order: usize,
}

impl Default for FisherOptions {
    fn default() -> Self {
        Self { order: None, points: 2001, floor: 1e-10, cutoff: None, refine_tol: 1e-3, max_order: 1024 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherInformation {
    /// Value on the refined grid and truncation.
    pub value: f64,
    /// Value before refinement.
    pub coarse_value: f64,
    /// Probability mass where the integrand was masked.
    pub masked_mass: f64,
    pub order: usize,
    pub points: usize,
}

fn solve(model: &ModelSpec, order: Option<usize>, max_order: usize) -> Result<HermiteState> {
    if model.has_feedback() {
        return steady_state_full(&assemble_generator(model, order.unwrap_or(24))?);
    }
    match order {
        Some(n) => steady_state_forward(model, n),
        None => Ok(steady_state_forward_auto(model, 16, max_order, 1e-12)?.0),
    }
}

/// `F = ∫ (∂_μ P)² / P dD` from a steady state and its parameter derivative,
/// both reconstructed through the same characteristic-function path.
/// Returns the value and the masked probability mass.
pub fn fisher_from_states(
    state: &HermiteState,
    derivative: &HermiteState,
    dl: &SuperOperator,
    grid: &GridSpec,
    cutoff: Option<f64>,
    floor: f64,
) -> Result<(f64, f64)> {
    let plan = FourierPlan::new(state, grid, cutoff)?;
    let (chi, dchi) = characteristic_with_derivative(state, derivative, dl, &plan.ks)?;
    let phi: Vec<Complex64> = chi.iter().map(|c| c.trace()).collect();
    let dphi: Vec<Complex64> = dchi.iter().map(|c| c.trace()).collect();
    let values = grid.values();
    let raw = plan.scalar(&phi, &values);
    let dp = plan.scalar(&dphi, &values);
    let (_, _, _) = clip_and_normalize(&values, raw.clone(), true)?;
    let mut integrand = Vec::with_capacity(values.len());
    let mut masked = Vec::with_capacity(values.len());
    for (p, d) in raw.iter().zip(&dp) {
        if *p > floor {
            integrand.push(d * d / p);
            masked.push(0.0);
        } else {
            integrand.push(0.0);
            masked.push(p.max(0.0));
        }
    }
    Ok((trapezoid(&values, &integrand), trapezoid(&values, &masked)))
}

/// Fisher information of the steady-state signal distribution with respect
/// to the model's parameter, at its current value. The result is checked
/// against a second evaluation with `N + 8` and a doubled grid.
pub fn fisher_information(model: &ModelSpec, opts: &FisherOptions) -> Result<FisherInformation> {
    let dl = model.liouvillian_derivative()?;
    let state = solve(model, opts.order, opts.max_order)?;
    let deriv = parameter_derivatives(model, &state)?;
    let grid = GridSpec::auto(&state, opts.points);
    let (coarse, _) = fisher_from_states(&state, &deriv, &dl, &grid, opts.cutoff, opts.floor)?;

    let n2 = state.order() + 8;
    let state2 = solve(model, Some(n2), opts.max_order)?;
    let deriv2 = parameter_derivatives(model, &state2)?;
    let fine = grid.refined();
    let (value, masked_mass) = fisher_from_states(&state2, &deriv2, &dl, &fine, opts.cutoff, opts.floor)?;
    if (value - coarse).abs() > opts.refine_tol * value.abs() + 1e-14 {
        return Err(QfpmeError::Convergence(format!(
            "Fisher information changed from {coarse:.6e} to {value:.6e} under refinement"
        )));
    }
    Ok(FisherInformation { value, coarse_value: coarse, masked_mass, order: n2, points: fine.points })
}
