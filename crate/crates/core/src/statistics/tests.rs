use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use super::characteristic::operator_characteristic_from;
use super::*;
use crate::hermite::{basis_values, BasisParams};
use crate::models::{driven_qubit, rabi_metrology, thermal_feedback_qubit};
use crate::operators::{build_liouvillian, c, sigma_minus, sigma_plus, sigma_x, sigma_y, sigma_z, CMatrix};
use crate::qfpme::{steady_state_forward, steady_state_forward_auto, HermiteState, InitialDetector, ModelSpec};

fn product(sigma: f64, n: usize) -> HermiteState {
    let rho = CMatrix::from_diagonal(&crate::CVector::from_vec(vec![c(0.3, 0.0), c(0.7, 0.0)]));
    HermiteState::initial(&rho, BasisParams::new(sigma, n).unwrap(), InitialDetector::Stationary)
}

fn steady(omega: f64, lambda: f64, gamma: f64) -> HermiteState {
    steady_state_forward_auto(&driven_qubit(omega, lambda, gamma).unwrap(), 16, 1024, 1e-12).unwrap().0
}

#[test]
fn coefficients_of_product_state() {
    let c = signal_coefficients(&product(0.4, 5));
    assert_eq!(c[0], 1.0);
    assert!(c[1..].iter().all(|&x| x == 0.0));
}

#[test]
fn product_state_moments_are_detector_noise() {
    let s = product(0.4, 5);
    assert_eq!(signal_moment(&s, 0).unwrap(), 1.0);
    assert!(signal_moment(&s, 1).unwrap().abs() < 1e-15);
    assert!((signal_moment(&s, 2).unwrap() - 0.4).abs() < 1e-15);
    assert!((signal_moment(&s, 4).unwrap() - 3.0 * 0.16).abs() < 1e-14);
    assert!(matches!(signal_moment(&s, 5), Err(crate::QfpmeError::TruncationTooSmall { .. })));
}

#[test]
fn driven_qubit_variance_closed_form() {
    let s = steady(1.0, 0.5, 2.0);
    assert!((signal_variance(&s).unwrap() - 1.1).abs() < 1e-12);
    assert!(signal_coefficients(&s)[1].abs() < 1e-12);
}

#[test]
fn characteristic_function_of_product_state_is_gaussian() {
    let s = product(0.3, 4);
    let ks = [-3.0, 0.0, 0.5, 2.0, 7.0];
    let phi = characteristic_function(&s, &ks).unwrap();
    for (k, p) in ks.iter().zip(&phi) {
        assert!((p - c((-k * k * 0.3 / 2.0).exp(), 0.0)).norm() < 1e-15);
    }
}

#[test]
fn characteristic_function_symmetry_and_bound() {
    let s = steady(1.0, 1.5, 1.0);
    let ks: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.37).collect();
    let phi = characteristic_function(&s, &ks).unwrap();
    assert!((phi[40] - c(1.0, 0.0)).norm() < 1e-14);
    for i in 0..ks.len() {
        assert!((phi[i] - phi[ks.len() - 1 - i].conj()).norm() < 1e-12);
        assert!(phi[i].norm() <= 1.0 + 1e-12);
    }
}

#[test]
fn continuation_reproduces_reliable_series() {
    // Both paths are accurate for moderate σ; switching early must not matter.
    let s = steady(1.0, 0.5, 1.0);
    let ks: Vec<f64> = (0..60).map(|i| i as f64 * 0.2).collect();
    let series = series_characteristic(&s, &ks);
    let continued = operator_characteristic_from(&s, &ks, 0.5).unwrap();
    for (a, b) in series.iter().zip(&continued) {
        assert!((a - b.trace()).norm() < 1e-9, "{a} vs {}", b.trace());
    }
}

#[test]
fn continuation_handles_narrow_detector_noise() {
    // σ = 1/80: the raw series loses all precision at large K.
    let s = steady(1.0, 10.0, 1.0);
    assert!(s.steady_context().is_some());
    let ks: Vec<f64> = (0..200).map(|i| i as f64 * 0.5).collect();
    let phi = characteristic_function(&s, &ks).unwrap();
    assert!(phi.iter().all(|p| p.norm() <= 1.0 + 1e-9));
    let d = reconstruct_distribution(&s, &ReconstructionOptions::default()).unwrap();
    assert!(d.clip_mass < 1e-8);
    assert!((d.moment(2) - signal_variance(&s).unwrap()).abs() < 1e-6);
}

#[test]
fn product_state_reconstructs_exact_gaussian() {
    let sigma = 0.3;
    let s = product(sigma, 3);
    let d = reconstruct_distribution(&s, &ReconstructionOptions::default()).unwrap();
    let err = d
        .grid
        .iter()
        .zip(&d.density)
        .map(|(x, p)| (p - (-x * x / (2.0 * sigma)).exp() / (2.0 * PI * sigma).sqrt()).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-8, "{err}");
    assert!((d.mass() - 1.0).abs() < 1e-12);
}

#[test]
fn reconstruction_matches_direct_summation() {
    // Direct summation of Σ c_n p_n(D) w(D) converges for σ = 1/4.
    let s = steady(1.0, 0.5, 2.0);
    let grid = GridSpec::new(-2.5, 2.5, 51).unwrap();
    let d = reconstruct_distribution(&s, &ReconstructionOptions { grid: Some(grid), ..Default::default() }).unwrap();
    let coeffs = signal_coefficients(&s);
    for (x, p) in d.grid.iter().zip(&d.density) {
        let direct: f64 = basis_values(*x, s.params()).iter().zip(&coeffs).map(|(b, c)| b * c).sum();
        assert!((p - direct).abs() < 1e-4, "D = {x}: {p} vs {direct}");
    }
}

#[test]
fn strong_measurement_peaks_near_eigenvalues() {
    let s = steady(1.0, 2.5, 1.0);
    let d = reconstruct_distribution(&s, &ReconstructionOptions::default()).unwrap();
    let peaks = d.local_maxima(0.1);
    assert_eq!(peaks.len(), 2, "{peaks:?}");
    assert!((peaks[0] + 1.0).abs() < 0.1 && (peaks[1] - 1.0).abs() < 0.1);
}

#[test]
fn moments_agree_with_quadrature() {
    let s = steady(1.0, 1.0, 1.5);
    let d = reconstruct_distribution(&s, &ReconstructionOptions::default()).unwrap();
    for q in 0..=4 {
        let exact = signal_moment(&s, q).unwrap();
        assert!((d.moment(q as i32) - exact).abs() < 1e-4, "q = {q}");
    }
}

#[test]
fn cutoff_below_minimum_is_rejected() {
    let s = product(0.5, 2);
    let opts = ReconstructionOptions { cutoff: Some(1.0), ..Default::default() };
    assert!(reconstruct_distribution(&s, &opts).is_err());
}

#[test]
fn conditional_state_of_product_is_system_state() {
    let s = product(0.5, 4);
    for d in [-1.0, 0.0, 0.7] {
        let cs = conditional_state(&s, d, DEFAULT_CONDITIONAL_FLOOR).unwrap();
        assert!((&cs.state - s.unconditional()).norm() < 1e-10);
        assert!((cs.state.trace().re - 1.0).abs() < 1e-10);
    }
}

#[test]
fn conditional_state_follows_the_signal() {
    let s = steady(1.0, 2.5, 0.5);
    let cs = conditional_state(&s, 1.0, DEFAULT_CONDITIONAL_FLOOR).unwrap();
    let up = crate::operators::basis_projector(2, 0);
    assert!(crate::fidelity(&cs.state, &up) > 0.9);
    assert!((cs.state.trace().re - 1.0).abs() < 1e-10);
    assert!(matches!(
        conditional_state(&s, 40.0, DEFAULT_CONDITIONAL_FLOOR),
        Err(crate::QfpmeError::ConditionalUndefined { .. })
    ));
}

#[test]
fn mutual_information_vanishes_for_product_state() {
    let i = mutual_information(&product(0.5, 3), &MutualInfoOptions::default()).unwrap();
    assert!(i.abs() < 1e-9, "{i}");
}

#[test]
fn mutual_information_grows_with_measurement_strength() {
    let mut prev = 0.0;
    for lambda in [0.5, 1.0, 1.5, 2.0, 2.5] {
        let i = mutual_information(&steady(1.0, lambda, 0.5), &MutualInfoOptions::default()).unwrap();
        assert!(i > prev && i <= 2f64.ln(), "lambda {lambda}: {i}");
        prev = i;
    }
}

#[test]
fn mutual_information_converges_in_truncation() {
    let model = driven_qubit(1.0, 1.0, 1.0).unwrap();
    let res = mutual_information_converged(|n| steady_state_forward(&model, n), 40, 80, &MutualInfoOptions::default())
        .unwrap();
    assert!(res.orders.len() >= 2);
    assert!((res.values[res.values.len() - 1] - res.values[res.values.len() - 2]).abs() < 1e-4);
}

#[test]
fn covariance_closed_forms() {
    let (omega, lambda, gamma) = (1.0, 0.5, 0.5);
    let s = steady(omega, lambda, gamma);
    let expected = gamma * (gamma + 2.0 * lambda) / (gamma * gamma + 2.0 * gamma * lambda + 4.0 * omega * omega);
    assert!((signal_observable_covariance(&s, &sigma_z()).unwrap() - expected).abs() < 1e-12);
    assert!(signal_observable_covariance(&s, &sigma_x()).unwrap().abs() < 1e-12);
    assert_eq!(signal_observable_covariance(&product(0.5, 3), &sigma_z()).unwrap(), 0.0);
    let bad = sigma_plus();
    assert!(signal_observable_covariance(&s, &bad).is_err());
}

proptest! {
    #[test]
    fn covariance_is_bilinear(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let s = steady(1.0, 0.7, 1.3);
        let mix = sigma_z() * c(a, 0.0) + sigma_y() * c(b, 0.0);
        let lhs = signal_observable_covariance(&s, &mix).unwrap();
        let rhs = a * signal_observable_covariance(&s, &sigma_z()).unwrap()
            + b * signal_observable_covariance(&s, &sigma_y()).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn characteristic_function_bounded(lambda in 0.2f64..3.0, gamma in 0.3f64..3.0, k in -30.0f64..30.0) {
        let s = steady(1.0, lambda, gamma);
        let phi = characteristic_function(&s, &[k, -k]).unwrap();
        prop_assert!(phi[0].norm() <= 1.0 + 1e-9);
        prop_assert!((phi[0] - phi[1].conj()).norm() < 1e-12);
    }
}

#[test]
fn correlation_at_zero_lag_is_variance() {
    let model = driven_qubit(1.0, 1.0, 1.0).unwrap();
    let var = signal_variance(&steady(1.0, 1.0, 1.0)).unwrap();
    let curve = current_correlation(&model, &[0.0, 50.0]).unwrap();
    assert!((curve.values[0] - var).abs() < 1e-10);
    assert!(curve.values[1].abs() < 1e-6 * curve.values[0]);
    assert!(curve.max_imag < 1e-10);
}

#[test]
fn correlation_of_monitored_thermal_qubit() {
    // A = σ_z commutes with the populations, which relax at Γ = κ(2n_B + 1).
    let (kappa, nb, lambda, gamma) = (0.7, 0.3, 0.4, 2.0);
    let l0 = build_liouvillian(&CMatrix::zeros(2, 2), &[(kappa * nb, sigma_plus()), (kappa * (nb + 1.0), sigma_minus())])
        .unwrap();
    let model = ModelSpec::new(l0, sigma_z(), lambda, gamma).unwrap();
    let big_gamma = kappa * (2.0 * nb + 1.0);
    let m = -1.0 / (2.0 * nb + 1.0);
    let sigma = model.sigma();
    let lags = [0.0, 0.3, 1.0, 4.0];
    let curve = current_correlation(&model, &lags).unwrap();
    for (tau, v) in lags.iter().zip(&curve.values) {
        let expected = sigma * (-gamma * tau).exp()
            + (1.0 - m * m) * gamma * (gamma * (-big_gamma * tau).exp() - big_gamma * (-gamma * tau).exp())
                / (gamma * gamma - big_gamma * big_gamma);
        assert!((v - expected).abs() < 1e-10, "tau {tau}: {v} vs {expected}");
    }
}

#[test]
fn correlation_of_frozen_populations() {
    // No dynamics besides dephasing: the populations of the reference state
    // persist and the signal keeps a constant offset variance 1 - <σ_z>².
    let l0 = crate::SuperOperator::zeros(2);
    let reference = CMatrix::from_diagonal(&crate::CVector::from_vec(vec![c(0.8, 0.0), c(0.2, 0.0)]));
    let model = ModelSpec::new(l0, sigma_z(), 0.6, 1.5).unwrap().with_reference_state(reference).unwrap();
    let sigma = model.sigma();
    let curve = current_correlation(&model, &[0.0, 1.0, 10.0]).unwrap();
    for (tau, v) in [0.0f64, 1.0, 10.0].iter().zip(&curve.values) {
        let expected = sigma * (-1.5 * tau).exp() + 1.0 - 0.36;
        assert!((v - expected).abs() < 1e-10, "tau {tau}: {v}");
    }
}

#[test]
fn correlations_decay_faster_for_wider_bandwidth() {
    let slow = current_correlation(&driven_qubit(1.0, 1.0, 0.6).unwrap(), &[0.0, 1.0]).unwrap();
    let fast = current_correlation(&driven_qubit(1.0, 1.0, 1.4).unwrap(), &[0.0, 1.0]).unwrap();
    assert!(fast.values[1] / fast.values[0] < slow.values[1] / slow.values[0]);
}

#[test]
fn correlation_rejects_feedback_and_negative_lags() {
    let fb = thermal_feedback_qubit(0.01, 0.5, 0.2, 0.5, 4.0).unwrap();
    assert!(current_correlation(&fb, &[0.0]).is_err());
    assert!(current_correlation(&driven_qubit(1.0, 1.0, 1.0).unwrap(), &[-1.0]).is_err());
}

#[test]
fn fisher_information_without_measurement_vanishes() {
    let f = fisher_information(&rabi_metrology(0.4, 0.0, 1e-6, 1.0).unwrap(), &FisherOptions::default()).unwrap();
    assert!(f.value >= 0.0 && f.value < 1e-6, "{f:?}");
}

#[test]
fn fisher_information_is_invariant_under_parameter_offset() {
    let base = rabi_metrology(0.4, 0.0, 1.0, 1.0).unwrap();
    let family = base.parameter().unwrap().0.shifted(0.3);
    let shifted = base.clone().with_parameterization(family, -0.3).unwrap();
    let a = fisher_information(&base, &FisherOptions::default()).unwrap();
    let b = fisher_information(&shifted, &FisherOptions::default()).unwrap();
    assert!((a.value - b.value).abs() < 1e-6 * a.value.max(1.0));
    assert!(a.masked_mass < 1e-6);
}

#[test]
fn fisher_information_from_derivative_states_matches_finite_differences() {
    // ∫ (∂P)²/P against P_μ reconstructed at μ ± h.
    let model = rabi_metrology(0.4, 0.0, 1.0, 1.0).unwrap();
    let f = fisher_information(&model, &FisherOptions::default()).unwrap().value;
    let h = 1e-4;
    let dist = |mu: f64| {
        let s = steady_state_forward(&model.at_parameter(mu).unwrap(), 96).unwrap();
        let grid = GridSpec::new(-6.0, 6.0, 2401).unwrap();
        reconstruct_distribution(&s, &ReconstructionOptions { grid: Some(grid), ..Default::default() }).unwrap()
    };
    let (p, plus, minus) = (dist(0.0), dist(h), dist(-h));
    let integrand: Vec<f64> = (0..p.grid.len())
        .map(|i| {
            let d = (plus.density[i] - minus.density[i]) / (2.0 * h);
            if p.density[i] > 1e-10 {
                d * d / p.density[i]
            } else {
                0.0
            }
        })
        .collect();
    let fd = super::distribution::trapezoid(&p.grid, &integrand);
    assert!((f - fd).abs() < 1e-5 * f, "{f} vs {fd}");
}

#[test]
fn entropy_of_mixed_qubit() {
    let rho = CMatrix::identity(2, 2) * Complex64::new(0.5, 0.0);
    assert!((von_neumann_entropy(&rho) - 2f64.ln()).abs() < 1e-15);
    assert_eq!(von_neumann_entropy(&crate::operators::basis_projector(2, 1)), 0.0);
}
