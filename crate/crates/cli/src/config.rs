//! Run configuration: a single JSON document, validated before any work.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use qfpme::models::{find_preset, PresetParams};
use qfpme::qfpme::InitialDetector;
use qfpme::{CMatrix, ModelSpec};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub solver: SolverConfig,
    pub grid: GridConfig,
    pub evolve: EvolveConfig,
    pub distribution: DistributionConfig,
    pub moments: MomentsConfig,
    pub mutual_info: MutualInfoConfig,
    pub covariance: CovarianceConfig,
    pub correlation: CorrelationConfig,
    pub fisher: FisherConfig,
    pub perturb: PerturbConfig,
    pub trajectories: TrajectoriesConfig,
    /// Optional one-parameter sweep for `moments`, `mutual-info` and `covariance`.
    pub sweep: Option<SweepConfig>,
    pub seed: u64,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub preset: String,
    pub params: BTreeMap<String, f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { preset: "driven_qubit".into(), params: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Forward substitution without feedback, full solve with it.
    Auto,
    Forward,
    Spectral,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub method: Method,
    pub order: usize,
    /// Double the order until the tail ratio drops below `tail_tol`
    /// (forward substitution only).
    pub auto_order: bool,
    pub max_order: usize,
    pub tail_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { method: Method::Auto, order: 32, auto_order: true, max_order: 2048, tail_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub points: usize,
    pub cutoff: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { min: None, max: None, points: 1001, cutoff: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    Stationary,
    Delta,
}

impl From<Detector> for InitialDetector {
    fn from(d: Detector) -> Self {
        match d {
            Detector::Stationary => InitialDetector::Stationary,
            Detector::Delta => InitialDetector::Delta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig {
    pub times: Vec<f64>,
    /// `mixed` or `basis:<k>`.
    pub initial_state: String,
    pub detector: Detector,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            times: vec![0.25, 0.5, 1.0, 2.0],
            initial_state: "basis:0".into(),
            detector: Detector::Stationary,
            rtol: 1e-8,
            atol: 1e-11,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistributionConfig {
    /// Evolve from `evolve.initial_state` to this time instead of using the
    /// steady state.
    pub time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MomentsConfig {
    pub max_q: usize,
}

impl Default for MomentsConfig {
    fn default() -> Self {
        Self { max_q: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MutualInfoConfig {
    pub points: usize,
    pub density_floor: f64,
    pub refine_tol: f64,
    pub max_refinements: usize,
}

impl Default for MutualInfoConfig {
    fn default() -> Self {
        Self { points: 401, density_floor: 1e-12, refine_tol: 1e-7, max_refinements: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CovarianceConfig {
    /// `measured`, `sigma_x`, `sigma_y`, `sigma_z` (qubits) or `projector:<k>`.
    pub observables: Vec<String>,
}

impl Default for CovarianceConfig {
    fn default() -> Self {
        Self { observables: vec!["measured".into()] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrelationConfig {
    /// Explicit lags; otherwise `points` uniform lags on `[0, tau_max]`.
    pub lags: Option<Vec<f64>>,
    pub tau_max: f64,
    pub points: usize,
}

impl Default for CorrelationConfig {
    fn default() -> Self {
        Self { lags: None, tau_max: 10.0, points: 201 }
    }
}

impl CorrelationConfig {
    pub fn resolved_lags(&self) -> Vec<f64> {
        match &self.lags {
            Some(l) => l.clone(),
            None if self.points < 2 => vec![0.0],
            None => (0..self.points).map(|i| self.tau_max * i as f64 / (self.points - 1) as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FisherConfig {
    pub lambdas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub points: usize,
    pub floor: f64,
    pub refine_tol: f64,
}

impl Default for FisherConfig {
    fn default() -> Self {
        Self {
            lambdas: (0..=20).map(|i| 0.25 * i as f64).collect(),
            gammas: vec![1.0],
            points: 2001,
            floor: 1e-10,
            refine_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbConfig {
    pub max_order: usize,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self { max_order: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectoriesConfig {
    pub n_traj: usize,
    pub t_end: f64,
    pub dt: Option<f64>,
    pub sample_times: Vec<f64>,
    /// `mixed` or `basis:<k>`.
    pub initial_state: String,
    pub detector: Detector,
    pub bins: usize,
    /// Also evolve the deterministic equation and tabulate its prediction.
    pub compare: bool,
}

impl Default for TrajectoriesConfig {
    fn default() -> Self {
        Self {
            n_traj: 1000,
            t_end: 1.0,
            dt: None,
            sample_times: Vec::new(),
            initial_state: "basis:0".into(),
            detector: Detector::Stationary,
            bins: 20,
            compare: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: String,
    pub values: Vec<f64>,
}

impl RunConfig {
    /// Reads a JSON config. A previous output file is accepted too: its
    /// `# config:` header line is used.
    pub fn load(path: &Path) -> Result<Value, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let json = if text.trim_start().starts_with('{') {
            text.as_str()
        } else {
            text.lines()
                .find_map(|l| l.strip_prefix("# config: "))
                .ok_or_else(|| CliError::Config(format!("{} is neither JSON nor a qfpme output", path.display())))?
        };
        serde_json::from_str(json).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn from_value(value: Value) -> Result<Self, CliError> {
        let mut cfg: RunConfig = serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.resolve()?;
        Ok(cfg)
    }

    /// Fills in preset defaults and checks cross-field constraints.
    fn resolve(&mut self) -> Result<(), CliError> {
        let preset = find_preset(&self.model.preset).map_err(|e| CliError::Config(e.to_string()))?;
        self.model.params = preset.resolve(&self.model.params).map_err(|e| CliError::Config(e.to_string()))?;
        if self.grid.min.is_some() != self.grid.max.is_some() {
            return Err(CliError::Config("grid.min and grid.max must be given together".into()));
        }
        if let Some(sweep) = &self.sweep {
            if !self.model.params.contains_key(&sweep.parameter) {
                return Err(CliError::Config(format!(
                    "sweep parameter `{}` is not a parameter of `{}`",
                    sweep.parameter, self.model.preset
                )));
            }
        }
        if self.solver.order == 0 {
            return Err(CliError::Config("solver.order must be positive".into()));
        }
        parse_state_spec(&self.evolve.initial_state, 1)?;
        parse_state_spec(&self.trajectories.initial_state, 1)?;
        Ok(())
    }

    pub fn model(&self) -> Result<ModelSpec, CliError> {
        self.model_with(&[])
    }

    /// The model with some parameters replaced.
    pub fn model_with(&self, overrides: &[(&str, f64)]) -> Result<ModelSpec, CliError> {
        let mut params: PresetParams = self.model.params.clone();
        for (k, v) in overrides {
            params.insert(k.to_string(), *v);
        }
        let preset = find_preset(&self.model.preset).map_err(|e| CliError::Config(e.to_string()))?;
        preset.build(&params).map_err(CliError::from)
    }
}

/// `mixed` or `basis:<k>`; `dim = 1` only checks the syntax.
pub fn parse_state_spec(spec: &str, dim: usize) -> Result<CMatrix, CliError> {
    if spec == "mixed" {
        return Ok(qfpme::operators::maximally_mixed(dim));
    }
    let k: usize = spec
        .strip_prefix("basis:")
        .and_then(|k| k.parse().ok())
        .ok_or_else(|| CliError::Config(format!("initial state must be `mixed` or `basis:<k>`, got `{spec}`")))?;
    if dim > 1 && k >= dim {
        return Err(CliError::Config(format!("basis index {k} out of range for dimension {dim}")));
    }
    Ok(qfpme::operators::basis_projector(dim.max(k + 1), k))
}

/// Applies `key.path=value` overrides to a JSON document. Values are parsed
/// as JSON when possible, otherwise taken as strings.
pub fn apply_overrides(mut root: Value, sets: &[String]) -> Result<Value, CliError> {
    for set in sets {
        let (path, raw) = set
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects key=value, got `{set}`")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let keys: Vec<&str> = path.split('.').collect();
        if keys.iter().any(|k| k.is_empty()) {
            return Err(CliError::Config(format!("malformed key `{path}`")));
        }
        let mut node = &mut root;
        for key in &keys[..keys.len() - 1] {
            if !node.is_object() {
                return Err(CliError::Config(format!("`{path}`: `{key}` is not a section")));
            }
            node = node
                .as_object_mut()
                .expect("object")
                .entry(key.to_string())
                .or_insert_with(|| Value::Object(Default::default()));
            if node.is_null() {
                *node = Value::Object(Default::default());
            }
        }
        match node.as_object_mut() {
            Some(map) => {
                map.insert(keys[keys.len() - 1].to_string(), value);
            }
            None => return Err(CliError::Config(format!("`{path}` does not address a section"))),
        }
    }
    Ok(root)
}
