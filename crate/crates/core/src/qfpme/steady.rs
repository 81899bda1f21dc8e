use std::sync::Arc;

use num_complex::Complex64;

use super::generator::{assemble_generator, BlockGenerator};
use super::model::ModelSpec;
use super::state::{HermiteState, SteadyContext};
use crate::error::{QfpmeError, Result};
use crate::hermite::BasisParams;
use crate::linalg::{stationary_vector, Factorized, TraceFreeSolver};
use crate::operators::{spectral_decompose, trace_row, vectorize, CMatrix, CVector};

/// Largest stacked dimension `N R²` accepted by the dense solvers.
pub const MAX_DENSE_DIM: usize = 6000;

fn context(gen: &BlockGenerator) -> Arc<SteadyContext> {
    Arc::new(SteadyContext {
        unconditional: gen.unconditional().matrix().clone(),
        anticommutator: gen.anticommutator().matrix().clone(),
        gamma: gen.gamma(),
    })
}

fn finish(gen: &BlockGenerator, blocks: Vec<CVector>) -> Result<HermiteState> {
    let r = gen.hilbert_dim();
    let matrices = blocks
        .iter()
        .map(|v| CMatrix::from_column_slice(r, r, v.as_slice()))
        .collect();
    let mut state = HermiteState::new(*gen.params(), matrices)?;
    state.hermitize();
    state.normalize();
    if !gen.has_feedback() {
        state = state.with_steady(context(gen));
    }
    Ok(state)
}

fn split(v: &CVector, r2: usize) -> Vec<CVector> {
    (0..v.len() / r2)
        .map(|n| v.rows(n * r2, r2).into_owned())
        .collect()
}

/// Solves `Q M = 0`, `Tr M_0 = 1` as a single dense linear system. Works
/// with or without feedback.
pub fn steady_state_full(gen: &BlockGenerator) -> Result<HermiteState> {
    let dim = gen.dim();
    if dim > MAX_DENSE_DIM {
        return Err(QfpmeError::TooLarge {
            dim,
            limit: MAX_DENSE_DIM,
        });
    }
    let r = gen.hilbert_dim();
    let r2 = r * r;
    let q = gen.to_dense();
    let mut functional = CVector::zeros(dim);
    functional.rows_mut(0, r2).copy_from(&trace_row(r));
    let mut reference = CVector::zeros(dim);
    reference
        .rows_mut(0, r2)
        .copy_from(&vectorize(gen.reference_state()));
    let (v, _) = stationary_vector(&q, &functional, 0, Some(&reference))?;
    finish(gen, split(&v, r2))
}

/// The stationary `M_0` of `Λ` (projected from the reference state when the
/// kernel is degenerate).
fn unconditional_stationary(gen: &BlockGenerator) -> Result<CVector> {
    let r = gen.hilbert_dim();
    let (v, _) = stationary_vector(
        gen.unconditional().matrix(),
        &trace_row(r),
        0,
        Some(&vectorize(gen.reference_state())),
    )?;
    Ok(v)
}

/// LU factors of `Λ - γn` for `n = 1 … N-1`.
struct ShiftedChain {
    shifted: Vec<Factorized>,
}

impl ShiftedChain {
    fn new(gen: &BlockGenerator) -> Result<Self> {
        let lam = gen.unconditional().matrix();
        let mut shifted = Vec::with_capacity(gen.order().saturating_sub(1));
        for n in 1..gen.order() {
            let mut a = lam.clone();
            for i in 0..a.nrows() {
                a[(i, i)] -= Complex64::new(gen.gamma() * n as f64, 0.0);
            }
            let lu = Factorized::new(a);
            if lu.is_singular() {
                return Err(QfpmeError::SingularShift {
                    order: n,
                    pivot_ratio: lu.pivot_ratio(),
                });
            }
            shifted.push(lu);
        }
        Ok(Self { shifted })
    }

    /// `(Λ - γn) X_n = -γ√n/(2√σ) 𝓒_A X_{n-1} + source(n)`.
    fn run(
        &self,
        gen: &BlockGenerator,
        x0: CVector,
        source: impl Fn(usize) -> Option<CVector>,
    ) -> Vec<CVector> {
        let ca = gen.anticommutator().matrix();
        let mut out = Vec::with_capacity(gen.order());
        out.push(x0);
        for n in 1..gen.order() {
            let mut rhs = ca * &out[n - 1] * Complex64::new(-gen.coupling(n), 0.0);
            if let Some(s) = source(n) {
                rhs += s;
            }
            out.push(self.shifted[n - 1].solve(&rhs));
        }
        out
    }
}

fn require_no_feedback(model: &ModelSpec, what: &str) -> Result<()> {
    if model.has_feedback() {
        return Err(QfpmeError::InvalidParameter(format!(
            "{what} requires a model without feedback"
        )));
    }
    Ok(())
}

/// Feedback-free steady state by forward substitution:
/// `Λ M_0 = 0`, then `(Λ - γn) M_n = -γ√n/(2√σ) 𝓒_A M_{n-1}`.
pub fn steady_state_forward(model: &ModelSpec, n: usize) -> Result<HermiteState> {
    require_no_feedback(model, "forward substitution")?;
    let gen = assemble_generator(model, n)?;
    let m0 = unconditional_stationary(&gen)?;
    let chain = ShiftedChain::new(&gen)?;
    finish(&gen, chain.run(&gen, m0, |_| None))
}

/// Outcome of [`steady_state_forward_auto`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutoTruncation {
    pub order: usize,
    pub tail_ratio: f64,
}

/// Doubles `N` from `n_start` until `‖M_{N-1}‖/‖M_0‖ < tol`.
pub fn steady_state_forward_auto(
    model: &ModelSpec,
    n_start: usize,
    n_max: usize,
    tol: f64,
) -> Result<(HermiteState, AutoTruncation)> {
    let mut n = n_start.max(2);
    loop {
        let state = steady_state_forward(model, n)?;
        let tail = state.tail_ratio();
        if tail < tol {
            return Ok((
                state,
                AutoTruncation {
                    order: n,
                    tail_ratio: tail,
                },
            ));
        }
        if n >= n_max {
            return Err(QfpmeError::TruncationTooSmall {
                required: 2 * n,
                available: n_max,
            });
        }
        n = (2 * n).min(n_max);
    }
}

/// Feedback-free steady state from the eigendecomposition of `Λ`: the
/// recursion is carried out on the coefficients `<<y_j|M_n>>`.
pub fn steady_state_spectral(model: &ModelSpec, n: usize) -> Result<HermiteState> {
    require_no_feedback(model, "the spectral solver")?;
    let gen = assemble_generator(model, n)?;
    let r = gen.hilbert_dim();
    let m0 = unconditional_stationary(&gen)?;
    let m0_mat = CMatrix::from_column_slice(r, r, m0.as_slice());
    let spectrum = spectral_decompose(gen.unconditional(), &m0_mat)?;
    let x = spectrum.right_vectors();
    let y = spectrum.dual_rows();
    let coupling = y * gen.anticommutator().matrix() * x;
    let eta = spectrum.eigenvalues();

    let mut coeffs = CVector::zeros(eta.len());
    coeffs[0] = Complex64::new(1.0, 0.0);
    let mut blocks = vec![m0];
    for order in 1..n {
        let shift = gen.gamma() * order as f64;
        let mut next = &coupling * &coeffs * Complex64::new(-gen.coupling(order), 0.0);
        for (j, e) in eta.iter().enumerate() {
            let gap = (e - shift).norm();
            if gap < 1e-8 * (e.norm() + shift) {
                return Err(QfpmeError::Resonance {
                    eigenvalue: format!("{e}"),
                    shift,
                    gap,
                });
            }
            next[j] /= e - shift;
        }
        blocks.push(x * &next);
        coeffs = next;
    }
    finish(&gen, blocks)
}

/// `∂_μ M_n` of the steady state for the model's parameter family.
///
/// Solves `Q ∂M = -(∂_μ 𝓛₀) M` with `Tr ∂M_0 = 0`; by forward substitution
/// when there is no feedback, as one dense system otherwise.
pub fn parameter_derivatives(model: &ModelSpec, state: &HermiteState) -> Result<HermiteState> {
    let d_l = model.liouvillian_derivative()?;
    let gen = assemble_generator(model, state.order())?;
    if state.hilbert_dim() != gen.hilbert_dim() {
        return Err(QfpmeError::DimensionMismatch {
            expected: gen.hilbert_dim(),
            actual: state.hilbert_dim(),
        });
    }
    let r = gen.hilbert_dim();
    let sources: Vec<CVector> = state
        .matrices()
        .iter()
        .map(|m| -(d_l.matrix() * vectorize(m)))
        .collect();

    let blocks = if gen.has_feedback() {
        let dim = gen.dim();
        if dim > MAX_DENSE_DIM {
            return Err(QfpmeError::TooLarge {
                dim,
                limit: MAX_DENSE_DIM,
            });
        }
        let r2 = r * r;
        let mut functional = CVector::zeros(dim);
        functional.rows_mut(0, r2).copy_from(&trace_row(r));
        let solver = TraceFreeSolver::new(&gen.to_dense(), &functional, 0)?;
        let mut rhs = CVector::zeros(dim);
        for (k, s) in sources.iter().enumerate() {
            rhs.rows_mut(k * r2, r2).copy_from(s);
        }
        split(&solver.solve(&rhs), r2)
    } else {
        let solver = TraceFreeSolver::new(gen.unconditional().matrix(), &trace_row(r), 0)?;
        let d0 = solver.solve(&sources[0]);
        ShiftedChain::new(&gen)?.run(&gen, d0, |k| Some(sources[k].clone()))
    };
    let matrices = blocks
        .iter()
        .map(|v| CMatrix::from_column_slice(r, r, v.as_slice()))
        .collect();
    let mut out = HermiteState::new(*gen.params(), matrices)?;
    out.hermitize();
    Ok(out)
}

/// Terms `M^{(j)}` of the expansion of the steady state in powers of the
/// feedback, `Q_0 M^{(j+1)} = -Q_fb M^{(j)}`, with `Tr M_0^{(j)} = δ_{j0}`.
#[derive(Debug, Clone)]
pub struct PerturbativeSolution {
    terms: Vec<HermiteState>,
}

impl PerturbativeSolution {
    pub fn terms(&self) -> &[HermiteState] {
        &self.terms
    }

    /// Highest order computed.
    pub fn max_order(&self) -> usize {
        self.terms.len() - 1
    }

    /// `Σ_{j ≤ k} M^{(j)}`.
    pub fn partial_sum(&self, k: usize) -> HermiteState {
        let mut sum = self.terms[0].clone();
        let r = sum.hilbert_dim();
        let params = *sum.params();
        let mut v = sum.to_vector();
        for term in self.terms.iter().take(k + 1).skip(1) {
            v += term.to_vector();
        }
        sum = HermiteState::from_vector(params, r, &v).expect("consistent shapes");
        sum
    }
}

/// Steady state of the feedback model as a series in `Q_fb` up to `order`.
pub fn perturbative_steady(
    model: &ModelSpec,
    n: usize,
    order: usize,
) -> Result<PerturbativeSolution> {
    let gen = assemble_generator(model, n)?;
    let r = gen.hilbert_dim();
    let r2 = r * r;
    let free = assemble_generator(&model.without_feedback(), n)?;
    let zeroth = steady_state_forward(&model.without_feedback(), n)?;
    let mut terms = vec![zeroth];
    if order == 0 {
        return Ok(PerturbativeSolution { terms });
    }
    let solver = TraceFreeSolver::new(gen.unconditional().matrix(), &trace_row(r), 0)?;
    let chain = ShiftedChain::new(&free)?;
    let tr = trace_row(r);
    for _ in 0..order {
        let prev = terms.last().expect("non-empty").to_vector();
        let mut rhs = CVector::zeros(prev.len());
        gen.add_feedback(&prev, &mut rhs, -1.0);
        let blocks = split(&rhs, r2);
        let defect = tr.dot(&blocks[0]).norm();
        if defect > 1e-10 * blocks[0].norm().max(1.0) {
            return Err(QfpmeError::InvalidParameter(
                "feedback generators must preserve the trace for the perturbative expansion".into(),
            ));
        }
        let x0 = solver.solve(&blocks[0]);
        let next = chain.run(&free, x0, |k| Some(blocks[k].clone()));
        let matrices = next
            .iter()
            .map(|v| CMatrix::from_column_slice(r, r, v.as_slice()))
            .collect();
        let mut state = HermiteState::new(BasisParams::new(model.sigma(), n)?, matrices)?;
        state.hermitize();
        terms.push(state);
    }
    Ok(PerturbativeSolution { terms })
}
