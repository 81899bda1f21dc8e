//! Ready-made models: a Rabi-driven qubit (with and without a frequency
//! parameter), the transverse-field Ising chain, the LMG model and a thermal
//! qubit under linear feedback.

use std::collections::BTreeMap;

use crate::error::{QfpmeError, Result};
use crate::hermite::FeedbackFunctionSpec;
use crate::operators::{
    build_liouvillian, build_superop, c, sigma_minus, sigma_plus, sigma_x, sigma_y, sigma_z,
    spin_operators, CMatrix, SuperOpKind, SuperOperator,
};
use crate::qfpme::{FeedbackChannel, ModelSpec, Parameterization};

pub type PresetParams = BTreeMap<String, f64>;

/// A named model with its parameter keys and default values.
#[derive(Debug, Clone, Copy)]
pub struct ModelPreset {
    pub name: &'static str,
    pub parameters: &'static [(&'static str, f64)],
    build: fn(&PresetParams) -> Result<ModelSpec>,
}

impl ModelPreset {
    /// Defaults overlaid with `overrides`; unknown keys are rejected.
    pub fn resolve(&self, overrides: &PresetParams) -> Result<PresetParams> {
        let mut out: PresetParams = self
            .parameters
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        for (k, v) in overrides {
            match out.get_mut(k) {
                Some(slot) => *slot = *v,
                None => {
                    return Err(QfpmeError::InvalidParameter(format!(
                        "unknown parameter `{k}` for model `{}`",
                        self.name
                    )))
                }
            }
        }
        Ok(out)
    }

    pub fn build(&self, overrides: &PresetParams) -> Result<ModelSpec> {
        (self.build)(&self.resolve(overrides)?)
    }
}

const PRESETS: [ModelPreset; 5] = [
    ModelPreset {
        name: "driven_qubit",
        parameters: &[("omega", 1.0), ("lambda", 0.5), ("gamma", 2.0)],
        build: |p| driven_qubit(p["omega"], p["lambda"], p["gamma"]),
    },
    ModelPreset {
        name: "rabi_metrology",
        parameters: &[("omega", 0.4), ("mu", 0.0), ("lambda", 1.0), ("gamma", 1.0)],
        build: |p| rabi_metrology(p["omega"], p["mu"], p["lambda"], p["gamma"]),
    },
    ModelPreset {
        name: "ising",
        parameters: &[
            ("L", 3.0),
            ("J", 1.0),
            ("h", 0.05),
            ("lambda", 1.0),
            ("gamma", 2.0),
        ],
        build: |p| {
            ising(
                qubit_count(p["L"])?,
                p["J"],
                p["h"],
                p["lambda"],
                p["gamma"],
            )
        },
    },
    ModelPreset {
        name: "lmg",
        parameters: &[("L", 4.0), ("h", 0.1), ("lambda", 1.0), ("gamma", 3.0)],
        build: |p| lmg(qubit_count(p["L"])?, p["h"], p["lambda"], p["gamma"]),
    },
    ModelPreset {
        name: "thermal_feedback_qubit",
        parameters: &[
            ("kappa", 0.01),
            ("n_B", 0.5),
            ("g", 0.0),
            ("lambda", 0.5),
            ("gamma", 4.0),
        ],
        build: |p| thermal_feedback_qubit(p["kappa"], p["n_B"], p["g"], p["lambda"], p["gamma"]),
    },
];

pub fn presets() -> &'static [ModelPreset] {
    &PRESETS
}

pub fn find_preset(name: &str) -> Result<&'static ModelPreset> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| QfpmeError::UnknownPreset(name.to_string()))
}

/// Builds the named model, overriding defaults with `params`.
pub fn preset(name: &str, params: &PresetParams) -> Result<ModelSpec> {
    find_preset(name)?.build(params)
}

fn qubit_count(l: f64) -> Result<usize> {
    if !(l.fract() == 0.0 && (1.0..=4.0).contains(&l)) {
        return Err(QfpmeError::InvalidParameter(format!(
            "L must be an integer in 1..=4, got {l}"
        )));
    }
    Ok(l as usize)
}

fn finite(name: &str, x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(QfpmeError::InvalidParameter(format!(
            "{name} must be finite, got {x}"
        )));
    }
    Ok(())
}

fn hamiltonian(h: &CMatrix) -> SuperOperator {
    build_superop(SuperOpKind::Hamiltonian(h)).expect("square Hermitian")
}

/// `H = Ωσ_x`, `A = σ_z`.
pub fn driven_qubit(omega: f64, lambda: f64, gamma: f64) -> Result<ModelSpec> {
    finite("omega", omega)?;
    ModelSpec::new(
        hamiltonian(&(sigma_x() * c(omega, 0.0))),
        sigma_z(),
        lambda,
        gamma,
    )
}

/// `H_μ = (Ω + μ)σ_x`, `A = σ_z`, with `μ` as the model parameter.
pub fn rabi_metrology(omega: f64, mu: f64, lambda: f64, gamma: f64) -> Result<ModelSpec> {
    finite("omega", omega)?;
    finite("mu", mu)?;
    let family = Parameterization::new(
        move |m| Ok(hamiltonian(&(sigma_x() * c(omega + m, 0.0)))),
        |_| Ok(hamiltonian(&sigma_x())),
    );
    driven_qubit(omega + mu, lambda, gamma)?.with_parameterization(family, mu)
}

/// `H = J Σ_j σ^z_{j+1} σ^z_j + h Σ_i σ^x_i` (open chain), `A = Σ_i σ^z_i`.
pub fn ising(qubits: usize, j: f64, h: f64, lambda: f64, gamma: f64) -> Result<ModelSpec> {
    finite("J", j)?;
    finite("h", h)?;
    let s = spin_operators(qubits)?;
    let mut ham = s.collective[0].clone() * c(h, 0.0);
    for site in 0..qubits.saturating_sub(1) {
        ham += s.z(site + 1) * s.z(site) * c(j, 0.0);
    }
    ModelSpec::new(hamiltonian(&ham), s.collective[2].clone(), lambda, gamma)
}

/// `H = -S_x²/L + h S_z`, `A = S_y`, with `S_q = Σ_i σ^q_i` on the full
/// `2^L`-dimensional space.
pub fn lmg(qubits: usize, h: f64, lambda: f64, gamma: f64) -> Result<ModelSpec> {
    finite("h", h)?;
    let s = spin_operators(qubits)?;
    let [sx, sy, sz] = &s.collective;
    let ham = sx * sx * c(-1.0 / qubits as f64, 0.0) + sz * c(h, 0.0);
    ModelSpec::new(hamiltonian(&ham), sy.clone(), lambda, gamma)
}

/// Projector onto the qubit ground state `|1>` (`σ_z = -1`), the state the
/// thermal bath relaxes towards.
pub fn ground_projector() -> CMatrix {
    crate::operators::basis_projector(2, 1)
}

/// `𝓛₀ = κ n_B 𝓓[σ₊] + κ(n_B + 1) 𝓓[σ₋]`, `A = σ_x`, feedback
/// `g D (-i[σ_y, ·])`. No feedback channel is attached when `g = 0`.
pub fn thermal_feedback_qubit(
    kappa: f64,
    n_b: f64,
    g: f64,
    lambda: f64,
    gamma: f64,
) -> Result<ModelSpec> {
    if !(kappa.is_finite() && kappa >= 0.0) || !(n_b.is_finite() && n_b >= 0.0) {
        return Err(QfpmeError::InvalidParameter(
            "kappa and n_B must be finite and non-negative".into(),
        ));
    }
    finite("g", g)?;
    let l0 = build_liouvillian(
        &CMatrix::zeros(2, 2),
        &[
            (kappa * n_b, sigma_plus()),
            (kappa * (n_b + 1.0), sigma_minus()),
        ],
    )?;
    let model = ModelSpec::new(l0, sigma_x(), lambda, gamma)?;
    if g == 0.0 {
        return Ok(model);
    }
    let channel = FeedbackChannel::new(FeedbackFunctionSpec::linear(), hamiltonian(&sigma_y()), g)?;
    model.with_feedback(channel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eigenvalues;

    fn spectrum(a: &CMatrix) -> Vec<f64> {
        let mut e = hermitian_eigenvalues(a);
        e.sort_by(|x, y| x.partial_cmp(y).unwrap());
        e
    }

    #[test]
    fn driven_qubit_measures_pauli_z() {
        let m = preset("driven_qubit", &PresetParams::new()).unwrap();
        let e = spectrum(m.measured());
        assert!((e[0] + 1.0).abs() < 1e-14 && (e[1] - 1.0).abs() < 1e-14);
        assert_eq!(m.sigma(), 0.5);
    }

    #[test]
    fn ising_magnetization_spectrum() {
        let m = ising(3, 1.0, 0.05, 1.0, 2.0).unwrap();
        let e = spectrum(m.measured());
        let expected = [-3.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 3.0];
        for (a, b) in e.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn presets_are_trace_preserving_with_hermitian_measurement() {
        for p in presets() {
            let mut over = PresetParams::new();
            if p.name == "thermal_feedback_qubit" {
                over.insert("g".into(), 0.3);
            }
            let m = p.build(&over).unwrap();
            assert!(m.liouvillian().trace_defect() < 1e-12, "{}", p.name);
            assert!(crate::operators::anti_hermitian_norm(m.measured()) < 1e-14);
            for c in m.feedback() {
                assert!(c.generator.trace_defect() < 1e-12);
            }
        }
    }

    #[test]
    fn feedback_channel_only_when_coupled() {
        let off = preset("thermal_feedback_qubit", &PresetParams::new()).unwrap();
        assert!(off.feedback().is_empty());
        let on = preset("thermal_feedback_qubit", &[("g".to_string(), 0.1)].into()).unwrap();
        assert_eq!(on.feedback().len(), 1);
        assert_eq!(on.feedback()[0].strength, 0.1);
    }

    #[test]
    fn rejects_unknown_names_and_keys() {
        assert!(matches!(
            preset("heisenberg", &PresetParams::new()),
            Err(QfpmeError::UnknownPreset(_))
        ));
        let bad: PresetParams = [("omegaa".to_string(), 1.0)].into();
        assert!(matches!(
            preset("driven_qubit", &bad),
            Err(QfpmeError::InvalidParameter(_))
        ));
        let big: PresetParams = [("L".to_string(), 5.0)].into();
        assert!(preset("ising", &big).is_err());
        let frac: PresetParams = [("L".to_string(), 2.5)].into();
        assert!(preset("lmg", &frac).is_err());
        let neg: PresetParams = [("lambda".to_string(), -1.0)].into();
        assert!(preset("lmg", &neg).is_err());
    }

    #[test]
    fn rabi_metrology_parameter_shift() {
        let m = rabi_metrology(0.4, 0.0, 1.0, 1.0).unwrap();
        let shifted = m.at_parameter(0.1).unwrap();
        let direct = driven_qubit(0.5, 1.0, 1.0).unwrap();
        assert!((shifted.liouvillian().matrix() - direct.liouvillian().matrix()).norm() < 1e-14);
        let d = m.liouvillian_derivative().unwrap();
        assert!((d.matrix() - hamiltonian(&sigma_x()).matrix()).norm() < 1e-14);
    }
}
