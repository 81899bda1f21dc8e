use std::fmt;
use std::sync::Arc;

use crate::error::{QfpmeError, Result};
use crate::hermite::FeedbackFunctionSpec;
use crate::operators::{
    build_superop, ensure_hermitian, maximally_mixed, CMatrix, SuperOpKind, SuperOperator,
};

type SuperOpBuilder = Arc<dyn Fn(f64) -> Result<SuperOperator> + Send + Sync>;

/// A family `μ ↦ 𝓛₀^μ` together with its derivative `∂_μ 𝓛₀^μ`.
#[derive(Clone)]
pub struct Parameterization {
    build: SuperOpBuilder,
    derivative: SuperOpBuilder,
}

impl Parameterization {
    pub fn new(
        build: impl Fn(f64) -> Result<SuperOperator> + Send + Sync + 'static,
        derivative: impl Fn(f64) -> Result<SuperOperator> + Send + Sync + 'static,
    ) -> Self {
        Self {
            build: Arc::new(build),
            derivative: Arc::new(derivative),
        }
    }

    pub fn liouvillian(&self, mu: f64) -> Result<SuperOperator> {
        (self.build)(mu)
    }

    pub fn derivative(&self, mu: f64) -> Result<SuperOperator> {
        (self.derivative)(mu)
    }

    /// The family `μ ↦ 𝓛₀^{μ + offset}`.
    pub fn shifted(&self, offset: f64) -> Self {
        let build = self.build.clone();
        let derivative = self.derivative.clone();
        Self {
            build: Arc::new(move |mu| build(mu + offset)),
            derivative: Arc::new(move |mu| derivative(mu + offset)),
        }
    }
}

/// Signal-dependent term `ε f(D) 𝓛_p` of the Liouvillian.
#[derive(Debug, Clone)]
pub struct FeedbackChannel {
    pub function: FeedbackFunctionSpec,
    pub generator: SuperOperator,
    pub strength: f64,
}

impl FeedbackChannel {
    pub fn new(
        function: FeedbackFunctionSpec,
        generator: SuperOperator,
        strength: f64,
    ) -> Result<Self> {
        function.validate()?;
        if !strength.is_finite() {
            return Err(QfpmeError::InvalidParameter(
                "feedback strength must be finite".into(),
            ));
        }
        Ok(Self {
            function,
            generator,
            strength,
        })
    }
}

/// Everything that defines the joint system/detector dynamics:
/// `𝓛(D) = 𝓛₀ + Σ_p ε_p f_p(D) 𝓛_p`, the measured operator `A`, the
/// measurement strength `λ` and the filter bandwidth `γ`.
#[derive(Clone)]
pub struct ModelSpec {
    liouvillian: SuperOperator,
    measured: CMatrix,
    lambda: f64,
    gamma: f64,
    feedback: Vec<FeedbackChannel>,
    parameter: Option<(Parameterization, f64)>,
    reference_state: Option<CMatrix>,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("hilbert_dim", &self.hilbert_dim())
            .field("lambda", &self.lambda)
            .field("gamma", &self.gamma)
            .field("feedback_channels", &self.feedback.len())
            .field("parameter", &self.parameter.as_ref().map(|p| p.1))
            .finish()
    }
}

fn check_rate(name: &str, value: f64) -> Result<()> {
    if !(value.is_finite() && value > 0.0) {
        return Err(QfpmeError::InvalidParameter(format!(
            "{name} must be > 0, got {value}"
        )));
    }
    Ok(())
}

impl ModelSpec {
    pub fn new(
        liouvillian: SuperOperator,
        measured: CMatrix,
        lambda: f64,
        gamma: f64,
    ) -> Result<Self> {
        check_rate("lambda", lambda)?;
        check_rate("gamma", gamma)?;
        ensure_hermitian(&measured, 1e-12)?;
        if measured.nrows() != liouvillian.hilbert_dim() {
            return Err(QfpmeError::DimensionMismatch {
                expected: liouvillian.hilbert_dim(),
                actual: measured.nrows(),
            });
        }
        Ok(Self {
            liouvillian,
            measured,
            lambda,
            gamma,
            feedback: Vec::new(),
            parameter: None,
            reference_state: None,
        })
    }

    pub fn with_feedback(mut self, channel: FeedbackChannel) -> Result<Self> {
        if channel.generator.hilbert_dim() != self.hilbert_dim() {
            return Err(QfpmeError::DimensionMismatch {
                expected: self.hilbert_dim(),
                actual: channel.generator.hilbert_dim(),
            });
        }
        self.feedback.push(channel);
        Ok(self)
    }

    /// Attaches a parameter family; `𝓛₀` becomes `𝓛₀^{reference}`.
    pub fn with_parameterization(
        mut self,
        family: Parameterization,
        reference: f64,
    ) -> Result<Self> {
        let l = family.liouvillian(reference)?;
        if l.hilbert_dim() != self.hilbert_dim() {
            return Err(QfpmeError::DimensionMismatch {
                expected: self.hilbert_dim(),
                actual: l.hilbert_dim(),
            });
        }
        self.liouvillian = l;
        self.parameter = Some((family, reference));
        Ok(self)
    }

    /// State projected onto a degenerate stationary subspace. Defaults to the
    /// maximally mixed state.
    pub fn with_reference_state(mut self, rho: CMatrix) -> Result<Self> {
        ensure_hermitian(&rho, 1e-12)?;
        if rho.nrows() != self.hilbert_dim() {
            return Err(QfpmeError::DimensionMismatch {
                expected: self.hilbert_dim(),
                actual: rho.nrows(),
            });
        }
        self.reference_state = Some(rho);
        Ok(self)
    }

    pub fn with_rates(mut self, lambda: f64, gamma: f64) -> Result<Self> {
        check_rate("lambda", lambda)?;
        check_rate("gamma", gamma)?;
        self.lambda = lambda;
        self.gamma = gamma;
        Ok(self)
    }

    /// Same model evaluated at another parameter value.
    pub fn at_parameter(&self, mu: f64) -> Result<Self> {
        let (family, _) = self
            .parameter
            .as_ref()
            .ok_or_else(|| QfpmeError::InvalidParameter("model has no parameter family".into()))?;
        let mut out = self.clone();
        out.liouvillian = family.liouvillian(mu)?;
        out.parameter = Some((family.clone(), mu));
        Ok(out)
    }

    pub fn without_feedback(&self) -> Self {
        let mut out = self.clone();
        out.feedback.clear();
        out
    }

    pub fn hilbert_dim(&self) -> usize {
        self.liouvillian.hilbert_dim()
    }

    pub fn liouvillian(&self) -> &SuperOperator {
        &self.liouvillian
    }

    pub fn measured(&self) -> &CMatrix {
        &self.measured
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `σ = γ/8λ`.
    pub fn sigma(&self) -> f64 {
        self.gamma / (8.0 * self.lambda)
    }

    pub fn feedback(&self) -> &[FeedbackChannel] {
        &self.feedback
    }

    pub fn has_feedback(&self) -> bool {
        self.feedback.iter().any(|c| c.strength != 0.0)
    }

    pub fn parameter(&self) -> Option<(&Parameterization, f64)> {
        self.parameter.as_ref().map(|(p, mu)| (p, *mu))
    }

    pub fn liouvillian_derivative(&self) -> Result<SuperOperator> {
        let (family, mu) = self
            .parameter
            .as_ref()
            .ok_or_else(|| QfpmeError::InvalidParameter("model has no parameter family".into()))?;
        family.derivative(*mu)
    }

    pub fn reference_state(&self) -> CMatrix {
        self.reference_state
            .clone()
            .unwrap_or_else(|| maximally_mixed(self.hilbert_dim()))
    }

    /// `λ 𝓓[A]`.
    pub fn dephasing(&self) -> SuperOperator {
        build_superop(SuperOpKind::Dissipator(&self.measured))
            .expect("validated")
            .scale(self.lambda)
    }

    /// `Λ = 𝓛₀ + λ𝓓[A]`, the unconditional generator.
    pub fn unconditional(&self) -> SuperOperator {
        &self.liouvillian + &self.dephasing()
    }

    /// `𝓒_A = {A, ·}`.
    pub fn anticommutator(&self) -> SuperOperator {
        build_superop(SuperOpKind::Anticommutator(&self.measured)).expect("validated")
    }

    /// Largest `|a|` over the spectrum of `A`.
    pub fn measured_radius(&self) -> f64 {
        let h = crate::operators::hermitian_part(&self.measured);
        h.symmetric_eigenvalues()
            .iter()
            .fold(0.0, |acc: f64, x| acc.max(x.abs()))
    }
}
