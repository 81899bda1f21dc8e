use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{QfpmeError, Result};
use crate::hermite::{normalized_polynomials, BasisParams};
use crate::operators::{anti_hermitian_norm, hermitian_part, CMatrix, CVector};

/// Generator data of a feedback-free steady state, retained so that signal
/// statistics can continue the characteristic function beyond the range where
/// the truncated Hermite series is numerically reliable.
#[derive(Debug, Clone)]
pub struct SteadyContext {
    pub(crate) unconditional: CMatrix,
    pub(crate) anticommutator: CMatrix,
    pub(crate) gamma: f64,
}

impl SteadyContext {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// Detector state at `t = 0` for dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialDetector {
    /// `D(0) ~ Normal(0, σ)`: only `M_0` is non-zero.
    #[default]
    Stationary,
    /// `D(0) = 0`: `M_n = ρ p_n(0)`.
    Delta,
}

/// Truncated joint state `ρ(D) = Σ_{n<N} M_n p_n(D) w(D)`.
#[derive(Debug, Clone)]
pub struct HermiteState {
    params: BasisParams,
    matrices: Vec<CMatrix>,
    steady: Option<Arc<SteadyContext>>,
}

impl HermiteState {
    pub fn new(params: BasisParams, matrices: Vec<CMatrix>) -> Result<Self> {
        if matrices.len() != params.n {
            return Err(QfpmeError::DimensionMismatch {
                expected: params.n,
                actual: matrices.len(),
            });
        }
        let r = matrices[0].nrows();
        for m in &matrices {
            if m.nrows() != r || m.ncols() != r {
                return Err(QfpmeError::DimensionMismatch {
                    expected: r,
                    actual: m.nrows(),
                });
            }
        }
        Ok(Self {
            params,
            matrices,
            steady: None,
        })
    }

    pub fn zeros(params: BasisParams, hilbert_dim: usize) -> Self {
        Self {
            params,
            matrices: vec![CMatrix::zeros(hilbert_dim, hilbert_dim); params.n],
            steady: None,
        }
    }

    /// System in `rho`, detector prepared as described by `detector`.
    pub fn initial(rho: &CMatrix, params: BasisParams, detector: InitialDetector) -> Self {
        let r = rho.nrows();
        let mut state = Self::zeros(params, r);
        match detector {
            InitialDetector::Stationary => state.matrices[0] = rho.clone(),
            InitialDetector::Delta => {
                let p = normalized_polynomials(params.n, 0.0, params.sigma);
                for (m, pn) in state.matrices.iter_mut().zip(p) {
                    *m = rho.scale(pn);
                }
            }
        }
        state
    }

    pub(crate) fn with_steady(mut self, ctx: Arc<SteadyContext>) -> Self {
        self.steady = Some(ctx);
        self
    }

    pub fn steady_context(&self) -> Option<&SteadyContext> {
        self.steady.as_deref()
    }

    pub fn params(&self) -> &BasisParams {
        &self.params
    }

    pub fn sigma(&self) -> f64 {
        self.params.sigma
    }

    pub fn order(&self) -> usize {
        self.matrices.len()
    }

    pub fn hilbert_dim(&self) -> usize {
        self.matrices[0].nrows()
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    pub fn matrix(&self, n: usize) -> &CMatrix {
        &self.matrices[n]
    }

    /// The unconditional system state `∫ρ(D) dD`.
    pub fn unconditional(&self) -> &CMatrix {
        &self.matrices[0]
    }

    pub fn trace0(&self) -> Complex64 {
        self.matrices[0].trace()
    }

    /// Stacked column-vectorizations of all blocks.
    pub fn to_vector(&self) -> CVector {
        let r2 = self.hilbert_dim() * self.hilbert_dim();
        let mut v = CVector::zeros(r2 * self.order());
        for (n, m) in self.matrices.iter().enumerate() {
            v.rows_mut(n * r2, r2).copy_from_slice(m.as_slice());
        }
        v
    }

    pub fn from_vector(params: BasisParams, hilbert_dim: usize, v: &CVector) -> Result<Self> {
        let r2 = hilbert_dim * hilbert_dim;
        if v.len() != r2 * params.n {
            return Err(QfpmeError::DimensionMismatch {
                expected: r2 * params.n,
                actual: v.len(),
            });
        }
        let matrices = (0..params.n)
            .map(|n| {
                CMatrix::from_column_slice(
                    hilbert_dim,
                    hilbert_dim,
                    &v.as_slice()[n * r2..(n + 1) * r2],
                )
            })
            .collect();
        Ok(Self {
            params,
            matrices,
            steady: None,
        })
    }

    pub fn hermitize(&mut self) {
        for m in &mut self.matrices {
            *m = hermitian_part(m);
        }
    }

    /// Rescales all blocks so that `Tr M_0 = 1`.
    pub fn normalize(&mut self) {
        let t = self.trace0().re;
        if t != 0.0 {
            for m in &mut self.matrices {
                *m /= Complex64::new(t, 0.0);
            }
        }
    }

    /// `‖M_{N-1}‖_F / ‖M_0‖_F`.
    pub fn tail_ratio(&self) -> f64 {
        self.matrices.last().map(|m| m.norm()).unwrap_or(0.0) / self.matrices[0].norm()
    }

    /// Largest block norm, `max_n ‖M_n‖_F`.
    pub fn max_block_norm(&self) -> f64 {
        self.matrices.iter().map(|m| m.norm()).fold(0.0, f64::max)
    }

    pub fn max_anti_hermitian(&self) -> f64 {
        self.matrices
            .iter()
            .map(anti_hermitian_norm)
            .fold(0.0, f64::max)
    }

    /// `max_n ‖M_n - M'_n‖_F / max(1, ‖M'_n‖_F)` over the common orders.
    pub fn max_block_deviation(&self, other: &HermiteState) -> f64 {
        self.matrices
            .iter()
            .zip(&other.matrices)
            .map(|(a, b)| (a - b).norm() / b.norm().max(1.0))
            .fold(0.0, f64::max)
    }

    /// The same state keeping only the first `n` blocks.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        let params = BasisParams::new(self.params.sigma, n)?;
        if n > self.order() {
            return Err(QfpmeError::TruncationTooSmall {
                required: n,
                available: self.order(),
            });
        }
        Ok(Self {
            params,
            matrices: self.matrices[..n].to_vec(),
            steady: self.steady.clone(),
        })
    }
}
