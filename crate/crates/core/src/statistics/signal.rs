use crate::error::{QfpmeError, Result};
use crate::hermite::j_moment_table;
use crate::operators::{ensure_hermitian, CMatrix};
use crate::qfpme::HermiteState;

/// `c_m = Tr M_m`.
pub fn signal_coefficients(state: &HermiteState) -> Vec<f64> {
    state.matrices().iter().map(|m| m.trace().re).collect()
}

/// `<D^q> = Σ_{n ≤ q} c_n J_n(q)`; needs `N ≥ q + 1`.
pub fn signal_moment(state: &HermiteState, q: usize) -> Result<f64> {
    if state.order() < q + 1 {
        return Err(QfpmeError::TruncationTooSmall { required: q + 1, available: state.order() });
    }
    let table = j_moment_table(q, state.params());
    let c = signal_coefficients(state);
    Ok((0..=q).map(|n| c[n] * table.get(n, q)).sum())
}

pub fn signal_mean(state: &HermiteState) -> Result<f64> {
    signal_moment(state, 1)
}

/// `Var(D) = σ(1 + √2 c_2 - c_1²)` for a normalized state.
pub fn signal_variance(state: &HermiteState) -> Result<f64> {
    let mean = signal_moment(state, 1)?;
    Ok(signal_moment(state, 2)? - mean * mean)
}

/// `Cov(D, B) = √σ [Tr(M_1 B) - Tr(M_1) Tr(M_0 B)]`.
pub fn signal_observable_covariance(state: &HermiteState, b: &CMatrix) -> Result<f64> {
    ensure_hermitian(b, 1e-12)?;
    if b.nrows() != state.hilbert_dim() {
        return Err(QfpmeError::DimensionMismatch { expected: state.hilbert_dim(), actual: b.nrows() });
    }
    if state.order() < 2 {
        return Err(QfpmeError::TruncationTooSmall { required: 2, available: state.order() });
    }
    let m0 = state.matrix(0);
    let m1 = state.matrix(1);
    let cov = ((m1 * b).trace() - m1.trace() * (m0 * b).trace()) * state.sigma().sqrt();
    Ok(cov.re)
}
