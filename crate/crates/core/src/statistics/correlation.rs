use num_complex::Complex64;

use crate::error::{QfpmeError, Result};
use crate::operators::{anticommutator, spectral_decompose, vectorize, CMatrix, Spectrum};
use crate::qfpme::{steady_state_forward, ModelSpec};

/// Threshold on `|η_j² - γ²| / γ²` below which a mode is treated as resonant.
pub const RESONANCE_TOL: f64 = 1e-8;

/// Stationary autocorrelation `C(τ) = <D(t)D(t+τ)> - <D>²`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationCurve {
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
    /// Largest imaginary residue discarded after summing the modes.
    pub max_imag: f64,
}

/// `C(τ)` for a model without feedback, from the eigendecomposition of `Λ`.
pub fn current_correlation(model: &ModelSpec, lags: &[f64]) -> Result<CorrelationCurve> {
    if model.has_feedback() {
        return Err(QfpmeError::InvalidParameter("two-time correlations require a model without feedback".into()));
    }
    let m0 = steady_state_forward(model, 1)?.unconditional().clone();
    let spectrum = spectral_decompose(&model.unconditional(), &m0)?;
    current_correlation_from(&spectrum, &m0, model.measured(), model.sigma(), model.gamma(), lags)
}

/// ```text
/// C(τ) = σ e^{-γτ} + ½ Σ_{j≠0} γ(γ e^{η_j τ} + η_j e^{-γτ}) / (γ² - η_j²)
///                     · Tr(A x_j) · <<y_j|{A, M_0}>>
/// ```
pub fn current_correlation_from(
    spectrum: &Spectrum,
    m0: &CMatrix,
    measured: &CMatrix,
    sigma: f64,
    gamma: f64,
    lags: &[f64],
) -> Result<CorrelationCurve> {
    if lags.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(QfpmeError::InvalidParameter("lags must be finite and non-negative".into()));
    }
    let source = spectrum.dual_rows() * vectorize(&anticommutator(measured, m0));
    let a_t = vectorize(&measured.transpose());
    let mut modes = Vec::new();
    for (j, &eta) in spectrum.eigenvalues().iter().enumerate().skip(1) {
        let gap = (eta * eta - gamma * gamma).norm();
        if gap < RESONANCE_TOL * gamma * gamma {
            return Err(QfpmeError::Resonance { eigenvalue: format!("{eta}"), shift: gamma, gap });
        }
        let x = spectrum.right_vectors().column(j);
        let weight = a_t.dot(&x) * source[j] * 0.5;
        if weight.norm() > 0.0 {
            modes.push((eta, weight));
        }
    }
    let g = Complex64::new(gamma, 0.0);
    let mut values = Vec::with_capacity(lags.len());
    let mut max_imag = 0.0f64;
    for &tau in lags {
        let decay = (-gamma * tau).exp();
        let mut c = Complex64::new(sigma * decay, 0.0);
        for &(eta, w) in &modes {
            c += w * g * (g * (eta * tau).exp() + eta * decay) / (g * g - eta * eta);
        }
        max_imag = max_imag.max(c.im.abs());
        values.push(c.re);
    }
    Ok(CorrelationCurve { lags: lags.to_vec(), values, max_imag })
}
