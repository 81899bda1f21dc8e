//! Signal statistics read off from a [`HermiteState`](crate::HermiteState):
//! moments, the characteristic function and reconstructed distribution,
//! conditional states, mutual information, signal/observable covariances,
//! two-time correlations and the Fisher information.

mod characteristic;
mod correlation;
mod distribution;
mod fisher;
mod signal;

pub use characteristic::{characteristic_function, operator_characteristic, series_characteristic};
pub use correlation::{current_correlation, current_correlation_from, CorrelationCurve, RESONANCE_TOL};
pub use distribution::{
    conditional_state, mutual_information, mutual_information_converged, reconstruct_distribution,
    reconstruct_joint, von_neumann_entropy, ConditionalState, ConvergedMutualInformation, GridSpec,
    JointDistribution, MutualInfoOptions, ReconstructionOptions, SignalDistribution, DEFAULT_CONDITIONAL_FLOOR,
    DEFAULT_CUTOFF_WIDTHS, ENTROPY_EIGEN_FLOOR, MAX_CLIP_MASS, TAPER_FRACTION,
};
pub use fisher::{fisher_from_states, fisher_information, FisherInformation, FisherOptions};
pub use signal::{signal_coefficients, signal_mean, signal_moment, signal_observable_covariance, signal_variance};

#[cfg(test)]
mod tests;
