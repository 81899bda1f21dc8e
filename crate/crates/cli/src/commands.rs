//! One function per subcommand.

use rayon::prelude::*;
use serde_json::{json, Value};

use qfpme::hermite::BasisParams;
use qfpme::operators::{basis_projector, sigma_x, sigma_y, sigma_z};
use qfpme::qfpme::{
    assemble_generator, evolve_sampled, perturbative_steady, steady_state_forward, steady_state_forward_auto,
    steady_state_full, steady_state_spectral, EvolveOptions, HermiteState,
};
use qfpme::statistics::{
    current_correlation, fisher_information, mutual_information, reconstruct_distribution, signal_moment,
    signal_observable_covariance, signal_variance, FisherOptions, GridSpec, MutualInfoOptions, ReconstructionOptions,
    SignalDistribution,
};
use qfpme::trajectories::{compare_histogram, histogram, run_ensemble, TrajectoryConfig};
use qfpme::{CMatrix, ModelSpec};

use crate::config::{parse_state_spec, Method, RunConfig};
use crate::output::{csv, json, Sink};
use crate::CliError;

struct Solved {
    state: HermiteState,
    method: &'static str,
}

fn solve_steady(cfg: &RunConfig, model: &ModelSpec) -> Result<Solved, CliError> {
    let s = &cfg.solver;
    let method = match s.method {
        Method::Auto if model.has_feedback() => Method::Full,
        Method::Auto => Method::Forward,
        m => m,
    };
    let (state, name) = match method {
        Method::Forward if s.auto_order => {
            (steady_state_forward_auto(model, s.order, s.max_order.max(s.order), s.tail_tol)?.0, "forward")
        }
        Method::Forward => (steady_state_forward(model, s.order)?, "forward"),
        Method::Spectral => (steady_state_spectral(model, s.order)?, "spectral"),
        _ => (steady_state_full(&assemble_generator(model, s.order)?)?, "full"),
    };
    Ok(Solved { state, method: name })
}

fn steady_health(solved: &Solved) -> Value {
    json!({
        "method": solved.method,
        "order": solved.state.order(),
        "tail_ratio": solved.state.tail_ratio(),
    })
}

fn evolve_health(state: &HermiteState) -> Value {
    json!({ "order": state.order(), "tail_ratio": state.tail_ratio() })
}

fn reconstruction(cfg: &RunConfig) -> Result<ReconstructionOptions, CliError> {
    let grid = match (cfg.grid.min, cfg.grid.max) {
        (Some(lo), Some(hi)) => Some(GridSpec::new(lo, hi, cfg.grid.points)?),
        _ => None,
    };
    Ok(ReconstructionOptions { grid, points: cfg.grid.points, cutoff: cfg.grid.cutoff })
}

/// Evolves from the configured initial condition, one state per time.
fn evolve_states(cfg: &RunConfig, model: &ModelSpec, times: &[f64]) -> Result<Vec<HermiteState>, CliError> {
    let rho0 = parse_state_spec(&cfg.evolve.initial_state, model.hilbert_dim())?;
    let params = BasisParams::new(model.sigma(), cfg.solver.order)?;
    let initial = HermiteState::initial(&rho0, params, cfg.evolve.detector.into());
    let gen = assemble_generator(model, cfg.solver.order)?;
    let opts = EvolveOptions { rtol: cfg.evolve.rtol, atol: cfg.evolve.atol, ..Default::default() };
    Ok(evolve_sampled(&initial, &gen, times, opts)?)
}

fn matrix_json(m: &CMatrix) -> Value {
    let part = |f: fn(&qfpme::Complex64) -> f64| -> Vec<Vec<f64>> {
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect()
    };
    json!({ "re": part(|z| z.re), "im": part(|z| z.im) })
}

pub fn steady(cfg: &RunConfig, sink: &Sink) -> Result<(), CliError> {
    let solved = solve_steady(cfg, &cfg.model()?)?;
    let s = &solved.state;
    let moments: Vec<f64> =
        (0..=cfg.moments.max_q.min(s.order() - 1)).map(|q| signal_moment(s, q)).collect::<Result<_, _>>()?;
    let report = json!({
        "command": "steady",
        "config": cfg,
        "health": steady_health(&solved),
        "mean": signal_moment(s, 1)?,
        "variance": signal_variance(s)?,
        "moments": moments,
        "unconditional": matrix_json(s.unconditional()),
    });
    sink.emit("steady.json", &json(&report))
}

pub fn evolve(cfg: &RunConfig, sink: &Sink) -> Result<(), CliError> {
    let model = cfg.model()?;
    let states = evolve_states(cfg, &model, &cfg.evolve.times)?;
    let r = model.hilbert_dim();
    let mut columns: Vec<String> = ["t", "trace", "mean", "variance"].map(String::from).to_vec();
    columns.extend((0..r).map(|k| format!("p{k}")));
    columns.push("tail_ratio".into());
    let mut rows = Vec::new();
    for (t, s) in cfg.evolve.times.iter().zip(&states) {
        let mut row = vec![*t, s.trace0().re, signal_moment(s, 1)?, signal_variance(s)?];
        row.extend((0..r).map(|k| s.unconditional()[(k, k)].re));
        row.push(s.tail_ratio());
        rows.push(row);
    }
    let health = json!({ "order": cfg.solver.order, "max_tail_ratio": states.iter().map(|s| s.tail_ratio()).fold(0.0, f64::max) });
    sink.emit("evolve.csv", &csv("evolve", cfg, &health, &columns, &rows))
}

fn distribution_health(dist: &SignalDistribution, base: Value) -> Value {
    let mut h = base;
    h["clip_mass"] = json!(dist.clip_mass);
    h["raw_mass"] = json!(dist.raw_mass);
    h["cutoff"] = json!(dist.cutoff);
    h
}

pub fn distribution(cfg: &RunConfig, sink: &Sink) -> Result<(), CliError> {
    let model = cfg.model()?;
    let (state, base) = match cfg.distribution.time {
        Some(t) => {
            let s = evolve_states(cfg, &model, &[t])?.pop().expect("one state");
            let h = evolve_health(&s);
            (s, h)
        }
        None => {
            let solved = solve_steady(cfg, &model)?;
            let h = steady_health(&solved);
            (solved.state, h)
        }
    };
    let dist = reconstruct_distribution(&state, &reconstruction(cfg)?)?;
    let rows: Vec<Vec<f64>> = dist.grid.iter().zip(&dist.density).map(|(d, p)| vec![*d, *p]).collect();
    let health = distribution_health(&dist, base);
    sink.emit("distribution.csv", &csv("distribution", cfg, &health, &["D".into(), "P".into()], &rows))
}

/// Models over the configured sweep (a single unswept model otherwise).
type Swept = (Option<String>, Vec<(f64, ModelSpec)>);

/// Column names, rows and solver health of a tabulated result.
type Table = (Vec<String>, Vec<Vec<f64>>, Value);

fn sweep_models(cfg: &RunConfig) -> Result<Swept, CliError> {
    match &cfg.sweep {
        None => Ok((None, vec![(f64::NAN, cfg.model()?)])),
        Some(s) => {
            let models = s
                .values
                .iter()
                .map(|&v| Ok((v, cfg.model_with(&[(&s.parameter, v)])?)))
                .collect::<Result<Vec<_>, CliError>>()?;
            Ok((Some(s.parameter.clone()), models))
        }
    }
}

/// Runs `f` on the steady state of every swept model, prefixing the sweep
/// value when there is one.
fn sweep_table(
    cfg: &RunConfig,
    columns: Vec<String>,
    f: impl Fn(&ModelSpec, &HermiteState) -> Result<Vec<f64>, CliError>,
) -> Result<Table, CliError> {
    let (param, models) = sweep_models(cfg)?;
    let mut rows = Vec::new();
    let mut health = Vec::new();
    for (v, model) in &models {
        let solved = solve_steady(cfg, model)?;
        let mut row = Vec::new();
        if param.is_some() {
            row.push(*v);
        }
        row.extend(f(model, &solved.state)?);
        rows.push(row);
        health.push(steady_health(&solved));
    }
    let mut cols = Vec::new();
    if let Some(p) = param {
        cols.push(p);
    }
    cols.extend(columns);
    let health = if health.len() == 1 { health.pop().expect("one") } else { json!(health) };
    Ok((cols, rows, health))
}

pub fn moments(cfg: &RunConfig, sink: &Sink) -> Result<(), CliError> {
    let q_max = cfg.moments.max_q;
    let mut columns: Vec<String> = (0..=q_max).map(|q| format!("m{q}")).collect();
    columns.push("variance".into());
    let (cols, rows, health) = sweep_table(cfg, columns, |_, s| {
        let mut row: Vec<f64> = (0..=q_max).map(|q| signal_moment(s, q)).collect::<Result<_, _>>()?;
        row.push(signal_variance(s)?);
        Ok(row)
    })?;
    sink.emit("moments.csv", &csv("moments", cfg, &health, &cols, &rows))
}

pub fn mutual_info(cfg: &RunConfig, sink: &Sink) -> Result<(), CliError> {
    let mut reconstruction = reconstruction(cfg)?;
    reconstruction.points = cfg.mutual_info.points;
    if let Some(g) = reconstruction.grid.as_mut() {
        g.points = cfg.mutual_info.points;
    }
    let opts = MutualInfoOptions {
        reconstruction,
        density_floor: cfg.mutual_info.density_floor,
        refine_tol: cfg.mutual_info.refine_tol,
        max_refinements: cfg.mutual_info.max_refinements,
    };
    let (cols, rows, health) =
        sweep_table(cfg, vec!["I".into()], |_, s| Ok(vec![mutual_information(s, &opts)?]))?;
    sink.emit("mutual_info.csv", &csv("mutual-info", cfg, &health, &cols, &rows))
}

fn observable(name: &str, model: &ModelSpec) -> Result<CMatrix, CliError> {
    let r = model.hilbert_dim();
    let qubit = |m: CMatrix| {
        if r == 2 {
            Ok(m)
        } else {
            Err(CliError::Config(format!("observable `{name}` needs a qubit model")))
        }
    };
    match name {
        "measured" => Ok(model.measured().clone()),
        "sigma_x" => qubit(sigma_x()),
        "sigma_y" => qubit(sigma_y()),
        "sigma_z" => qubit(sigma_z()),
        _ => match name.strip_prefix("projector:").and_then(|k| k.parse::<usize>().ok()) {
            Some(k) if k < r => Ok(basis_projector(r, k)),
            _ => Err(CliError::Config(format!("unknown observable `{name}`"))),
        },
    }
}

pub fn covariance(cfg: &RunConfig, sink: &Sink) -> Result<(), CliError> {
    let names = cfg.covariance.observables.clone();
    let (cols, rows, health) = sweep_table(cfg, names.clone(), |model, s| {
        names.iter().map(|n| Ok(signal_observable_covariance(s, &observable(n, model)?)?)).collect()
    })?;
    sink.emit("covariance.csv", &csv("covariance", cfg, &health, &cols, &rows))
}

pub fn correlation(cfg: &RunConfig, sink: &Sink) -> Result<(), CliError> {
    let lags = cfg.correlation.resolved_lags();
    let curve = current_correlation(&cfg.model()?, &lags)?;
    let rows: Vec<Vec<f64>> = curve.lags.iter().zip(&curve.values).map(|(t, c)| vec![*t, *c]).collect();
    let health = json!({ "max_imag": curve.max_imag });
    sink.emit("correlation.csv", &csv("correlation", cfg, &health, &["tau".into(), "C".into()], &rows))
}

pub fn fisher(cfg: &RunConfig, sink: &Sink) -> Result<(), CliError> {
    for key in ["lambda", "gamma"] {
        if !cfg.model.params.contains_key(key) {
            return Err(CliError::Config(format!("model `{}` has no `{key}` parameter", cfg.model.preset)));
        }
    }
    if cfg.model()?.parameter().is_none() {
        return Err(CliError::Config(format!("model `{}` has no estimation parameter", cfg.model.preset)));
    }
    let opts = FisherOptions {
        points: cfg.fisher.points,
        floor: cfg.fisher.floor,
        cutoff: cfg.grid.cutoff,
        refine_tol: cfg.fisher.refine_tol,
        ..Default::default()
    };
    let points: Vec<(f64, f64)> =
        cfg.fisher.gammas.iter().flat_map(|&g| cfg.fisher.lambdas.iter().map(move |&l| (l, g))).collect();
    if points.iter().any(|(l, _)| *l < 0.0) {
        return Err(CliError::Config("fisher.lambdas must be non-negative".into()));
    }
    let results: Vec<Result<Vec<f64>, CliError>> = points
        .par_iter()
        .map(|&(lambda, gamma)| {
            // no measurement, no information
            if lambda == 0.0 {
                return Ok(vec![lambda, gamma, 0.0, 0.0, 0.0]);
            }
            let model = cfg.model_with(&[("lambda", lambda), ("gamma", gamma)])?;
            let f = fisher_information(&model, &opts)?;
            Ok(vec![lambda, gamma, f.value, f.masked_mass, f.order as f64])
        })
        .collect();
    let rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let health = json!({ "max_masked_mass": rows.iter().map(|r| r[3]).fold(0.0, f64::max) });
    let columns = ["lambda", "gamma", "F_I", "masked_mass", "order"].map(String::from);
    sink.emit("fisher.csv", &csv("fisher", cfg, &health, &columns, &rows))
}

pub fn perturb(cfg: &RunConfig, sink: &Sink) -> Result<(), CliError> {
    let model = cfg.model()?;
    if !model.has_feedback() {
        return Err(CliError::Config("perturb needs a model with an active feedback channel".into()));
    }
    let n = cfg.solver.order;
    let exact = steady_state_full(&assemble_generator(&model, n)?)?;
    let series = perturbative_steady(&model, n, cfg.perturb.max_order)?;
    let rows: Vec<Vec<f64>> = (0..=series.max_order())
        .map(|j| {
            let partial = series.partial_sum(j);
            let m0 = (partial.unconditional() - exact.unconditional()).norm();
            vec![j as f64, m0, partial.max_block_deviation(&exact), series.terms()[j].unconditional().norm()]
        })
        .collect();
    let health = json!({ "order": n, "exact_tail_ratio": exact.tail_ratio() });
    let columns = ["J", "error_M0", "error_state", "term_M0_norm"].map(String::from);
    sink.emit("perturb.csv", &csv("perturb", cfg, &health, &columns, &rows))
}

pub fn trajectories(cfg: &RunConfig, sink: &Sink) -> Result<(), CliError> {
    let model = cfg.model()?;
    let tc = &cfg.trajectories;
    let rho0 = parse_state_spec(&tc.initial_state, model.hilbert_dim())?;
    let mut config = TrajectoryConfig::new(rho0, tc.t_end, tc.n_traj, cfg.seed);
    config.dt = tc.dt;
    config.sample_times = tc.sample_times.clone();
    config.initial_detector = tc.detector.into();
    let ens = run_ensemble(&config, &model)?;
    if tc.bins == 0 {
        return Err(CliError::Config("trajectories.bins must be positive".into()));
    }

    let predicted: Option<Vec<SignalDistribution>> = if tc.compare {
        let mut evolve_cfg = cfg.clone();
        evolve_cfg.evolve.initial_state = tc.initial_state.clone();
        evolve_cfg.evolve.detector = tc.detector;
        let states = evolve_states(&evolve_cfg, &model, &ens.times)?;
        let dists = states
            .iter()
            .map(|s| {
                let auto = GridSpec::auto(s, 2);
                let grid = GridSpec::new(auto.min, auto.max, tc.bins * 50 + 1)?;
                reconstruct_distribution(s, &ReconstructionOptions { grid: Some(grid), ..Default::default() })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Some(dists)
    } else {
        None
    };

    let mut columns: Vec<String> = ["t", "D_lo", "D_hi", "empirical"].map(String::from).to_vec();
    if predicted.is_some() {
        columns.push("predicted".into());
    }
    let mut rows = Vec::new();
    let mut scores = Vec::new();
    for (k, &t) in ens.times.iter().enumerate() {
        let samples = &ens.signals[k];
        let (lo, hi) = match &predicted {
            Some(d) => (d[k].grid[0], *d[k].grid.last().expect("grid")),
            None => {
                let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) }
            }
        };
        let width = (hi - lo) / tc.bins as f64;
        let empirical = histogram(samples, lo, hi, tc.bins);
        for (b, &e) in empirical.iter().enumerate() {
            let mut row = vec![t, lo + b as f64 * width, lo + (b + 1) as f64 * width, e];
            if let Some(d) = &predicted {
                let dist = &d[k];
                let seg = &dist.density[b * 50..=(b + 1) * 50];
                let h = dist.grid[1] - dist.grid[0];
                let mass: f64 = seg.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum();
                row.push(mass / width);
            }
            rows.push(row);
        }
        if let Some(d) = &predicted {
            let cmp = compare_histogram(samples, &d[k], tc.bins)?;
            scores.push(json!({ "t": t, "total_variation": cmp.total_variation, "ks": cmp.ks, "standard_error": cmp.standard_error }));
        }
    }
    let health = json!({ "dt": ens.dt, "warnings": ens.warnings, "comparison": scores });
    sink.emit("trajectories.csv", &csv("trajectories", cfg, &health, &columns, &rows))
}

struct Check {
    name: &'static str,
    value: f64,
    threshold: f64,
}

impl Check {
    fn json(&self) -> Value {
        json!({ "name": self.name, "value": self.value, "threshold": self.threshold, "pass": self.value < self.threshold })
    }
}

/// Cross-checks the solvers and the trajectory simulator on the configured
/// model. Returns whether every check passed.
pub fn validate(cfg: &RunConfig, sink: &Sink) -> Result<bool, CliError> {
    let model = cfg.model()?;
    let n = cfg.solver.order;
    let mut checks = Vec::new();
    let full = steady_state_full(&assemble_generator(&model, n)?)?;
    if !model.has_feedback() {
        let forward = steady_state_forward(&model, n)?;
        checks.push(Check { name: "forward_vs_full", value: forward.max_block_deviation(&full), threshold: 1e-8 });
        let spectral = steady_state_spectral(&model, n)?;
        checks.push(Check { name: "spectral_vs_forward", value: spectral.max_block_deviation(&forward), threshold: 1e-8 });
        let var = signal_variance(&forward)?;
        let c0 = current_correlation(&model, &[0.0])?.values[0];
        checks.push(Check { name: "correlation_at_zero_vs_variance", value: (c0 - var).abs(), threshold: 1e-8 });
    }
    let dist = reconstruct_distribution(&full, &ReconstructionOptions::default())?;
    checks.push(Check { name: "distribution_mass", value: (dist.mass() - 1.0).abs(), threshold: 1e-6 });
    let moment_gap = (1..=4.min(n - 1))
        .map(|q| Ok((dist.moment(q as i32) - signal_moment(&full, q)?).abs()))
        .collect::<Result<Vec<f64>, CliError>>()?
        .into_iter()
        .fold(0.0, f64::max);
    checks.push(Check { name: "quadrature_vs_moments", value: moment_gap, threshold: 1e-4 });

    let tc = &cfg.trajectories;
    let rho0 = parse_state_spec(&tc.initial_state, model.hilbert_dim())?;
    let mut config = TrajectoryConfig::new(rho0, tc.t_end, tc.n_traj, cfg.seed);
    config.dt = tc.dt;
    config.initial_detector = tc.detector.into();
    let ens = run_ensemble(&config, &model)?;
    let mut evolve_cfg = cfg.clone();
    evolve_cfg.evolve.initial_state = tc.initial_state.clone();
    evolve_cfg.evolve.detector = tc.detector;
    let evolved = evolve_states(&evolve_cfg, &model, &[tc.t_end])?.pop().expect("one state");
    let predicted = reconstruct_distribution(&evolved, &ReconstructionOptions::default())?;
    let cmp = compare_histogram(ens.final_signals(), &predicted, tc.bins)?;
    checks.push(Check {
        name: "trajectories_total_variation",
        value: cmp.total_variation,
        threshold: (4.0 * cmp.standard_error).max(0.05),
    });

    let pass = checks.iter().all(|c| c.value < c.threshold);
    let report = json!({
        "command": "validate",
        "config": cfg,
        "pass": pass,
        "checks": checks.iter().map(Check::json).collect::<Vec<_>>(),
    });
    sink.emit("validate.json", &json(&report))?;
    Ok(pass)
}
