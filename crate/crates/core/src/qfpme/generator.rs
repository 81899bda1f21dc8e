use num_complex::Complex64;

use super::model::ModelSpec;
use super::state::HermiteState;
use crate::error::{QfpmeError, Result};
use crate::hermite::{alpha_matrix, AlphaMatrix, BasisParams};
use crate::operators::{CMatrix, CVector, SuperOperator};

/// The linear generator `Q = Q_0 + Q_fb` on the stacked blocks
/// `(M_0, …, M_{N-1})`. Row `m` reads
///
/// ```text
/// (Λ - γm) M_m + γ√m/(2√σ) 𝓒_A M_{m-1} + Σ_p ε_p Σ_n α_p[n,m] 𝓛_p M_n
/// ```
#[derive(Debug, Clone)]
pub struct BlockGenerator {
    params: BasisParams,
    gamma: f64,
    unconditional: SuperOperator,
    anticommutator: SuperOperator,
    feedback: Vec<(AlphaMatrix, SuperOperator)>,
    reference_state: CMatrix,
}

/// Builds `Q` for `model` truncated at `n` blocks.
pub fn assemble_generator(model: &ModelSpec, n: usize) -> Result<BlockGenerator> {
    let params = BasisParams::new(model.sigma(), n)?;
    let alphas = model
        .feedback()
        .iter()
        .map(|c| alpha_matrix(&c.function, &params))
        .collect::<Result<Vec<_>>>()?;
    assemble_with_alphas(model, n, alphas)
}

/// As [`assemble_generator`] with precomputed feedback matrices, one per
/// channel in order.
pub fn assemble_with_alphas(
    model: &ModelSpec,
    n: usize,
    alphas: Vec<AlphaMatrix>,
) -> Result<BlockGenerator> {
    let params = BasisParams::new(model.sigma(), n)?;
    if alphas.len() != model.feedback().len() {
        return Err(QfpmeError::DimensionMismatch {
            expected: model.feedback().len(),
            actual: alphas.len(),
        });
    }
    let mut feedback = Vec::new();
    for (alpha, channel) in alphas.into_iter().zip(model.feedback()) {
        if alpha.size() != n {
            return Err(QfpmeError::DimensionMismatch {
                expected: n,
                actual: alpha.size(),
            });
        }
        if channel.strength != 0.0 {
            feedback.push((alpha, channel.generator.scale(channel.strength)));
        }
    }
    Ok(BlockGenerator {
        params,
        gamma: model.gamma(),
        unconditional: model.unconditional(),
        anticommutator: model.anticommutator(),
        feedback,
        reference_state: model.reference_state(),
    })
}

impl BlockGenerator {
    pub fn params(&self) -> &BasisParams {
        &self.params
    }

    pub fn order(&self) -> usize {
        self.params.n
    }

    pub fn hilbert_dim(&self) -> usize {
        self.unconditional.hilbert_dim()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn unconditional(&self) -> &SuperOperator {
        &self.unconditional
    }

    pub fn anticommutator(&self) -> &SuperOperator {
        &self.anticommutator
    }

    pub fn has_feedback(&self) -> bool {
        !self.feedback.is_empty()
    }

    pub(crate) fn reference_state(&self) -> &CMatrix {
        &self.reference_state
    }

    /// `γ√m / (2√σ)`, the weight of `𝓒_A M_{m-1}` in row `m`.
    pub fn coupling(&self, m: usize) -> f64 {
        self.gamma * (m as f64).sqrt() / (2.0 * self.params.sigma.sqrt())
    }

    /// Dimension `N R²` of the stacked vector.
    pub fn dim(&self) -> usize {
        self.params.n * self.unconditional.dim()
    }

    /// `Q v` for the stacked vector `v`.
    pub fn apply_vec(&self, v: &CVector) -> CVector {
        let mut out = self.apply_unfed(v);
        self.add_feedback(v, &mut out, 1.0);
        out
    }

    /// `Q_0 v` alone.
    pub fn apply_unfed(&self, v: &CVector) -> CVector {
        let r2 = self.unconditional.dim();
        let lam = self.unconditional.matrix();
        let ca = self.anticommutator.matrix();
        let mut out = CVector::zeros(v.len());
        for m in 0..self.params.n {
            let block = v.rows(m * r2, r2);
            let mut row = lam * block - block * Complex64::new(self.gamma * m as f64, 0.0);
            if m > 0 {
                let prev = v.rows((m - 1) * r2, r2);
                row += ca * prev * Complex64::new(self.coupling(m), 0.0);
            }
            out.rows_mut(m * r2, r2).copy_from(&row);
        }
        out
    }

    /// `out += scale · Q_fb v`.
    pub fn add_feedback(&self, v: &CVector, out: &mut CVector, scale: f64) {
        let r2 = self.unconditional.dim();
        let n = self.params.n;
        for (alpha, gen) in &self.feedback {
            let applied: Vec<CVector> = (0..n).map(|k| gen.matrix() * v.rows(k * r2, r2)).collect();
            for m in 0..n {
                let mut acc = CVector::zeros(r2);
                for (k, lk) in applied.iter().enumerate() {
                    let a = alpha.get(k, m);
                    if a != 0.0 {
                        acc.axpy(Complex64::new(a * scale, 0.0), lk, Complex64::new(1.0, 0.0));
                    }
                }
                let mut target = out.rows_mut(m * r2, r2);
                target += acc;
            }
        }
    }

    /// `dρ/dt` in block form.
    pub fn apply(&self, state: &HermiteState) -> Result<HermiteState> {
        if state.order() != self.params.n || state.hilbert_dim() != self.hilbert_dim() {
            return Err(QfpmeError::DimensionMismatch {
                expected: self.params.n,
                actual: state.order(),
            });
        }
        let out = self.apply_vec(&state.to_vector());
        HermiteState::from_vector(self.params, self.hilbert_dim(), &out)
    }

    /// Dense `N R² × N R²` matrix of `Q`.
    pub fn to_dense(&self) -> CMatrix {
        let r2 = self.unconditional.dim();
        let n = self.params.n;
        let mut q = CMatrix::zeros(n * r2, n * r2);
        for m in 0..n {
            let mut diag = self.unconditional.matrix().clone();
            for i in 0..r2 {
                diag[(i, i)] -= Complex64::new(self.gamma * m as f64, 0.0);
            }
            q.view_mut((m * r2, m * r2), (r2, r2)).copy_from(&diag);
            if m > 0 {
                let c = self.anticommutator.matrix() * Complex64::new(self.coupling(m), 0.0);
                q.view_mut((m * r2, (m - 1) * r2), (r2, r2)).copy_from(&c);
            }
        }
        q + self.feedback_dense()
    }

    /// Dense matrix of `Q_fb` alone.
    pub(crate) fn feedback_dense(&self) -> CMatrix {
        let r2 = self.unconditional.dim();
        let n = self.params.n;
        let mut q = CMatrix::zeros(n * r2, n * r2);
        for (alpha, gen) in &self.feedback {
            for m in 0..n {
                for k in 0..n {
                    let a = alpha.get(k, m);
                    if a != 0.0 {
                        let mut view = q.view_mut((m * r2, k * r2), (r2, r2));
                        view += gen.matrix() * Complex64::new(a, 0.0);
                    }
                }
            }
        }
        q
    }
}
