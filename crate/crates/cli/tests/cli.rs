use std::path::Path;
use std::process::{Command, Output};

fn qfpme(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qfpme")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Numeric rows of a CSV output (after the `#` lines and the column header).
fn rows(csv: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let data = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    (header, data)
}

#[test]
fn steady_reports_driven_qubit_statistics() {
    let out = stdout(&qfpme(&["steady"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["mean"].as_f64().unwrap().abs() < 1e-10);
    assert!((v["variance"].as_f64().unwrap() - 1.1).abs() < 1e-10);
    assert_eq!(v["config"]["model"]["params"]["gamma"], 2.0);
}

#[test]
fn fisher_sweep_starts_at_zero_without_measurement() {
    let out = stdout(&qfpme(&["fisher", "--set", "model.preset=rabi_metrology", "--set", "fisher.lambdas=[0, 0.5, 1]"]));
    let (header, data) = rows(&out);
    assert_eq!(&header[..3], &["lambda", "gamma", "F_I"]);
    assert_eq!(data[0][2], 0.0);
    assert!(data[1][2] > 0.0 && data[2][2] > data[1][2]);
}

#[test]
fn distribution_is_normalized() {
    let out = stdout(&qfpme(&["distribution", "--set", "model.params.lambda=2.5", "--set", "model.params.gamma=1"]));
    let (header, data) = rows(&out);
    assert_eq!(header, ["D", "P"]);
    let mass: f64 = data.windows(2).map(|w| 0.5 * (w[1][0] - w[0][0]) * (w[0][1] + w[1][1])).sum();
    assert!((mass - 1.0).abs() < 1e-6);
    assert!(out.lines().any(|l| l.starts_with("# health: ") && l.contains("clip_mass")));
}

#[test]
fn sweeps_prefix_the_swept_parameter() {
    let out = stdout(&qfpme(&[
        "mutual-info",
        "--set",
        "model.params.gamma=0.5",
        "--set",
        "sweep={\"parameter\": \"lambda\", \"values\": [0.5, 1.0, 2.0]}",
    ]));
    let (header, data) = rows(&out);
    assert_eq!(header, ["lambda", "I"]);
    assert!(data.windows(2).all(|w| w[1][1] > w[0][1]));
    assert!(data.iter().all(|r| r[1] > 0.0 && r[1] <= 2f64.ln()));
}

#[test]
fn correlation_starts_at_variance() {
    let out = stdout(&qfpme(&["correlation", "--set", "correlation.lags=[0, 1, 100]"]));
    let (_, data) = rows(&out);
    assert!((data[0][1] - 1.1).abs() < 1e-8);
    assert!(data[2][1].abs() < 1e-10);
}

#[test]
fn config_errors_exit_with_two() {
    for args in [
        vec!["steady", "--set", "solver.ordr=3"],
        vec!["steady", "--set", "model.preset=unknown"],
        vec!["steady", "--set", "model.params.L=2"],
        vec!["perturb"],
    ] {
        let out = qfpme(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
        assert_eq!(err["error"], "config");
    }
}

#[test]
fn numerical_failures_exit_with_three() {
    // the dephasing mode -2λ coincides with the filter rate
    let out = qfpme(&["correlation", "--set", "model.params.lambda=0.1", "--set", "model.params.gamma=0.2"]);
    assert_eq!(out.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "resonance");
}

#[test]
fn outputs_are_reproducible_and_rerunnable() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str, extra: &[&str]| {
        let mut args = vec!["trajectories", "--out", sub, "--seed", "7", "--set", "trajectories.n_traj=200"];
        args.extend_from_slice(extra);
        let out = qfpme(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    run(a.to_str().unwrap(), &[]);
    run(b.to_str().unwrap(), &[]);
    let first = std::fs::read(a.join("trajectories.csv")).unwrap();
    assert_eq!(first, std::fs::read(b.join("trajectories.csv")).unwrap());

    // the header of an output is itself a valid config
    let replay = qfpme(&["trajectories", "--config", a.join("trajectories.csv").to_str().unwrap(), "--out", c.to_str().unwrap()]);
    assert!(replay.status.success());
    assert_eq!(first, std::fs::read(c.join("trajectories.csv")).unwrap());
    assert!(String::from_utf8(first).unwrap().contains("\"seed\":7"));
}

#[test]
fn config_file_and_overrides_combine() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(&path, r#"{"model": {"preset": "driven_qubit", "params": {"omega": 1.0, "lambda": 0.5, "gamma": 0.5}}}"#).unwrap();
    let out = stdout(&qfpme(&[
        "covariance",
        "--config",
        path.to_str().unwrap(),
        "--set",
        "covariance.observables=[\"sigma_z\", \"sigma_x\"]",
    ]));
    let (_, data) = rows(&out);
    assert!((data[0][0] - 0.75 / 4.75).abs() < 1e-10);
    assert!(data[0][1].abs() < 1e-10);
    assert!(!Path::new("covariance.csv").exists());
}

#[test]
fn perturbation_series_improves_with_order() {
    let out = stdout(&qfpme(&[
        "perturb",
        "--set",
        "model.preset=thermal_feedback_qubit",
        "--set",
        "model.params.g=0.05",
        "--set",
        "solver.order=24",
    ]));
    let (_, data) = rows(&out);
    assert_eq!(data.len(), 4);
    assert!(data[3][2] < 1e-2 * data[0][2]);
}

#[test]
fn validate_passes_on_the_driven_qubit() {
    let out = stdout(&qfpme(&["validate"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["pass"], true);
    assert!(v["checks"].as_array().unwrap().len() >= 5);
}

#[test]
fn evolve_tracks_trace_and_populations() {
    let out = stdout(&qfpme(&["evolve", "--set", "evolve.times=[0, 1, 30]"]));
    let (header, data) = rows(&out);
    assert_eq!(&header[..6], &["t", "trace", "mean", "variance", "p0", "p1"]);
    assert_eq!(data[0][4], 1.0);
    for r in &data {
        assert!((r[1] - 1.0).abs() < 1e-12);
        assert!((r[4] + r[5] - 1.0).abs() < 1e-12);
    }
    assert!((data[2][3] - 1.1).abs() < 1e-6);
}
