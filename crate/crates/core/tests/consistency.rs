use qfpme::models::{driven_qubit, ground_projector, lmg, preset, presets, thermal_feedback_qubit, PresetParams};
use qfpme::operators::basis_projector;
use qfpme::qfpme::{
    assemble_generator, evolve, perturbative_steady, steady_state_forward, steady_state_full, EvolveOptions,
    HermiteState, InitialDetector,
};
use qfpme::statistics::{reconstruct_distribution, signal_moment, signal_variance, ReconstructionOptions};
use qfpme::trajectories::{compare_histogram, run_ensemble, TrajectoryConfig, DEFAULT_BINS};
use qfpme::BasisParams;

#[test]
fn trajectories_sample_the_steady_signal() {
    let model = driven_qubit(1.0, 0.5, 2.0).unwrap();
    let state = steady_state_forward(&model, 40).unwrap();
    let mut cfg = TrajectoryConfig::new(basis_projector(2, 0), 6.0, 2000, 99);
    cfg.dt = Some(2e-3);
    let ens = run_ensemble(&cfg, &model).unwrap();
    let d = ens.final_signals();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let exact_var = signal_variance(&state).unwrap();
    assert!(mean.abs() < 3.0 * (exact_var / n).sqrt(), "mean {mean}");
    assert!((var - exact_var).abs() < 3.0 * exact_var * (2.0 / n).sqrt(), "var {var} vs {exact_var}");
    let dist = reconstruct_distribution(&state, &ReconstructionOptions::default()).unwrap();
    let cmp = compare_histogram(d, &dist, DEFAULT_BINS).unwrap();
    assert!(cmp.total_variation < 3.0 * cmp.standard_error + 0.01, "{cmp:?}");
}

#[test]
fn evolution_relaxes_to_the_steady_state() {
    let model = driven_qubit(1.0, 1.0, 1.5).unwrap();
    let n = 24;
    let target = steady_state_forward(&model, n).unwrap();
    let start = HermiteState::initial(
        &basis_projector(2, 1),
        BasisParams::new(model.sigma(), n).unwrap(),
        InitialDetector::Delta,
    );
    let relaxed = evolve(&start, &assemble_generator(&model, n).unwrap(), 40.0, EvolveOptions::default()).unwrap();
    assert!(relaxed.max_block_deviation(&target) < 1e-6);
    assert!((relaxed.trace0() - 1.0).norm() < 1e-12);
}

#[test]
fn feedback_steady_state_is_reached_dynamically() {
    let model = thermal_feedback_qubit(0.01, 0.5, 0.3, 0.5, 4.0).unwrap();
    let n = 24;
    let gen = assemble_generator(&model, n).unwrap();
    let target = steady_state_full(&gen).unwrap();
    let start = HermiteState::initial(
        &basis_projector(2, 1),
        BasisParams::new(model.sigma(), n).unwrap(),
        InitialDetector::Stationary,
    );
    let relaxed = evolve(&start, &gen, 3000.0, EvolveOptions::default()).unwrap();
    assert!((relaxed.unconditional() - target.unconditional()).norm() < 1e-5);
    let p0 = (target.unconditional() * ground_projector()).trace().re;
    assert!(p0 > 0.6, "{p0}");
}

#[test]
fn perturbative_series_approaches_exact_solution() {
    let model = thermal_feedback_qubit(0.01, 0.5, 0.05, 0.5, 4.0).unwrap();
    let n = 24;
    let exact = steady_state_full(&assemble_generator(&model, n).unwrap()).unwrap();
    let series = perturbative_steady(&model, n, 4).unwrap();
    let err = |k| series.partial_sum(k).max_block_deviation(&exact);
    assert!(err(4) < err(0) * 1e-3, "{} {}", err(0), err(4));
    for t in &series.terms()[1..] {
        assert!(t.trace0().norm() < 1e-12);
    }
}

#[test]
fn every_preset_builds_with_defaults() {
    for p in presets() {
        let model = preset(p.name, &PresetParams::new()).unwrap();
        assert!(model.lambda() > 0.0 && model.gamma() > 0.0, "{}", p.name);
    }
    let mut bad = PresetParams::new();
    bad.insert("nonsense".into(), 1.0);
    assert!(preset("driven_qubit", &bad).is_err());
    assert!(preset("no_such_model", &PresetParams::new()).is_err());
}

#[test]
fn lmg_signal_is_centered_and_symmetric() {
    let model = lmg(4, 0.1, 1.0, 3.0).unwrap();
    let state = steady_state_forward(&model, 32).unwrap();
    assert!(signal_moment(&state, 1).unwrap().abs() < 1e-10);
    assert!(signal_moment(&state, 3).unwrap().abs() < 1e-10);
    let dist = reconstruct_distribution(&state, &ReconstructionOptions::default()).unwrap();
    let k = dist.grid.len();
    let asym = (0..k).map(|i| (dist.density[i] - dist.density[k - 1 - i]).abs()).fold(0.0, f64::max);
    assert!(asym < 1e-8, "{asym}");
}

#[test]
fn halving_the_step_stays_within_sampling_error() {
    let model = driven_qubit(1.0, 0.5, 2.0).unwrap();
    let rho0 = basis_projector(2, 0);
    let t = std::f64::consts::FRAC_PI_4;
    let n = 48;
    let initial = HermiteState::initial(&rho0, BasisParams::new(model.sigma(), n).unwrap(), InitialDetector::Stationary);
    let state = evolve(&initial, &assemble_generator(&model, n).unwrap(), t, EvolveOptions::default()).unwrap();
    let dist = reconstruct_distribution(&state, &ReconstructionOptions::default()).unwrap();
    let dt = qfpme::trajectories::default_dt(&model);
    let score = |step: f64| {
        let mut cfg = TrajectoryConfig::new(rho0.clone(), t, 3000, 5);
        cfg.dt = Some(step);
        let ens = run_ensemble(&cfg, &model).unwrap();
        compare_histogram(ens.final_signals(), &dist, DEFAULT_BINS).unwrap()
    };
    let (coarse, fine) = (score(dt), score(dt / 2.0));
    assert!((coarse.total_variation - fine.total_variation).abs() < 2.0 * coarse.standard_error, "{coarse:?} {fine:?}");
}
