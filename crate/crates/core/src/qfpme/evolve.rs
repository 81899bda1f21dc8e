use super::generator::BlockGenerator;
use super::state::HermiteState;
use crate::error::{QfpmeError, Result};
use crate::ode::{Dopri5, Tolerances};
use crate::operators::CVector;

/// Tolerances for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub min_step: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-11, max_steps: 2_000_000, min_step: 1e-14 }
    }
}

/// Integrates `dM/dt = Q M` from `state` for a time `t_end`, re-hermitizing
/// and renormalizing after every accepted step.
pub fn evolve(state: &HermiteState, gen: &BlockGenerator, t_end: f64, opts: EvolveOptions) -> Result<HermiteState> {
    Ok(evolve_sampled(state, gen, &[t_end], opts)?.pop().expect("one sample"))
}

/// As [`evolve`], returning the state at each of the non-decreasing `times`.
pub fn evolve_sampled(
    state: &HermiteState,
    gen: &BlockGenerator,
    times: &[f64],
    opts: EvolveOptions,
) -> Result<Vec<HermiteState>> {
    if state.order() != gen.order() || state.hilbert_dim() != gen.hilbert_dim() {
        return Err(QfpmeError::DimensionMismatch { expected: gen.order(), actual: state.order() });
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(QfpmeError::InvalidParameter("sample times must be finite, non-negative and sorted".into()));
    }
    let params = *gen.params();
    let r = gen.hilbert_dim();
    let y0 = state.to_vector();
    let rate = gen.apply_vec(&y0).norm() / y0.norm().max(f64::MIN_POSITIVE);
    let h0 = if rate > 0.0 { 0.01 / rate } else { 1e-3 };
    let tol = Tolerances { rtol: opts.rtol, atol: opts.atol, max_steps: opts.max_steps, min_step: opts.min_step };
    let mut ode = Dopri5::new(|_, y: &CVector| gen.apply_vec(y), 0.0, y0, h0, tol);
    let tidy = |y: &mut CVector| {
        let mut s = HermiteState::from_vector(params, r, y).expect("consistent shapes");
        s.hermitize();
        s.normalize();
        *y = s.to_vector();
    };
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        ode.advance_to(t, tidy)?;
        out.push(HermiteState::from_vector(params, r, &ode.y)?);
    }
    Ok(out)
}
