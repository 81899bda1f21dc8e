use thiserror::Error;

pub type Result<T> = std::result::Result<T, QfpmeError>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum QfpmeError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("hilbert space dimension {dim} exceeds the configured limit {limit}")]
    TooLarge { dim: usize, limit: usize },

    #[error("operator is not hermitian (anti-hermitian part {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("superoperator is near-defective: reconstruction residual {residual:.3e} exceeds {threshold:.3e}")]
    NearDefective { residual: f64, threshold: f64 },

    #[error("stationary state is not unique: kernel dimension {0}")]
    DegenerateKernel(usize),

    #[error("no trace-normalizable stationary state")]
    NoStationaryState,

    #[error("shifted system at order {order} is singular (pivot ratio {pivot_ratio:.3e})")]
    SingularShift { order: usize, pivot_ratio: f64 },

    #[error("resonance between eigenvalue {eigenvalue} and shift {shift} (gap {gap:.3e})")]
    Resonance {
        eigenvalue: String,
        shift: f64,
        gap: f64,
    },

    #[error("step size underflow at t = {time}")]
    StepSizeUnderflow { time: f64 },

    #[error("quadrature did not converge (last change {residual:.3e})")]
    QuadratureNonConvergence { residual: f64 },

    #[error("truncation order {available} too small: {required} coefficients needed")]
    TruncationTooSmall { required: usize, available: usize },

    #[error("reconstructed density has negative mass {mass:.3e} (increase the truncation order)")]
    TruncationFailure { mass: f64 },

    #[error("signal density {density:.3e} at D = {signal} is below the floor {floor:.3e}")]
    ConditionalUndefined {
        signal: f64,
        density: f64,
        floor: f64,
    },

    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error("norm collapse in trajectory {index} at t = {time}")]
    NormCollapse { index: usize, time: f64 },

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("unknown model preset `{0}`")]
    UnknownPreset(String),

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),
}

impl QfpmeError {
    /// True for failures of the numerics (singularity, resonance, loss of
    /// convergence) as opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            QfpmeError::DimensionMismatch { .. }
                | QfpmeError::InvalidParameter(_)
                | QfpmeError::TooLarge { .. }
                | QfpmeError::NotHermitian { .. }
                | QfpmeError::UnknownPreset(_)
                | QfpmeError::EmptyEnsemble
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            QfpmeError::DimensionMismatch { .. } => "dimension_mismatch",
            QfpmeError::InvalidParameter(_) => "invalid_parameter",
            QfpmeError::TooLarge { .. } => "too_large",
            QfpmeError::NotHermitian { .. } => "not_hermitian",
            QfpmeError::NearDefective { .. } => "near_defective",
            QfpmeError::DegenerateKernel(_) => "degenerate_kernel",
            QfpmeError::NoStationaryState => "no_stationary_state",
            QfpmeError::SingularShift { .. } => "singular_shift",
            QfpmeError::Resonance { .. } => "resonance",
            QfpmeError::StepSizeUnderflow { .. } => "step_size_underflow",
            QfpmeError::QuadratureNonConvergence { .. } => "quadrature_non_convergence",
            QfpmeError::TruncationTooSmall { .. } => "truncation_too_small",
            QfpmeError::TruncationFailure { .. } => "truncation_failure",
            QfpmeError::ConditionalUndefined { .. } => "conditional_undefined",
            QfpmeError::Convergence(_) => "convergence",
            QfpmeError::NormCollapse { .. } => "norm_collapse",
            QfpmeError::EmptyEnsemble => "empty_ensemble",
            QfpmeError::UnknownPreset(_) => "unknown_preset",
            QfpmeError::LinearAlgebra(_) => "linear_algebra",
        }
    }
}
