use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use eigenmatrix::harness::io::write_observations;
use eigenmatrix::harness::synth::synthesize;
use eigenmatrix::harness::{generate_samples, Difficulty, ExperimentConfig, Scenario};
use eigenmatrix::numerics::C64;
use eigenmatrix::recovery::SpikeModel;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eigenmatrix")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_fourier_data(path: &Path) -> SpikeModel {
    let cfg = ExperimentConfig::scenario(Scenario::Fourier, Difficulty::Easy);
    let samples = generate_samples(&cfg.samples, 7).unwrap();
    let truth = SpikeModel::new(
        vec![C64::new(-0.6, 0.0), C64::new(0.05, 0.0), C64::new(0.7, 0.0)],
        vec![C64::new(1.0, 0.0), C64::new(0.5, 0.0), C64::new(-0.8, 0.0)],
    )
    .unwrap();
    let u = synthesize(&cfg.kernel, &samples, &truth).unwrap();
    write_observations(&samples, &u, path).unwrap();
    truth
}

#[test]
fn recover_from_data_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("obs.csv");
    let truth = write_fourier_data(&data);
    let out = run(&["recover", "--data", data.to_str().unwrap(), "--scenario", "fourier", "--n-x", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let locs = v["result"]["refined"]["locations"].as_array().unwrap();
    assert_eq!(locs.len(), 3);
    let mut xs: Vec<f64> = locs.iter().map(|z| z[0].as_f64().unwrap()).collect();
    xs.sort_by(f64::total_cmp);
    for (x, t) in xs.iter().zip(&truth.locations) {
        assert!((x - t.re).abs() < 1e-8, "{xs:?}");
    }
}

#[test]
fn recover_with_order_selection_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("obs.csv");
    write_fourier_data(&data);
    let out = run(&[
        "recover",
        "--data",
        data.to_str().unwrap(),
        "--scenario",
        "fourier",
        "--select-order",
        "6",
        "--format",
        "csv",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.starts_with("x_re,x_im,w_re,w_im,series"));
    assert_eq!(text.lines().filter(|l| l.ends_with(",refined")).count(), 3);
}

#[test]
fn experiment_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "experiment",
        "--scenario",
        "deconv",
        "--trials",
        "2",
        "--sigma",
        "0",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["report.json", "report.csv", "trial_000.csv", "trial_001.csv"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let plot = fs::read_to_string(out_dir.join("trial_000.csv")).unwrap();
    assert!(plot.starts_with("x_re,x_im,w_re,w_im,series"));
    for s in ["exact", "raw", "refined"] {
        assert_eq!(plot.lines().filter(|l| l.ends_with(s)).count(), 3, "{s}");
    }
}

#[test]
fn experiment_from_config_file_matches_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::scenario(Scenario::Spectral, Difficulty::Hard);
    cfg.trials = 2;
    let path = dir.path().join("cfg.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    let a = run(&["experiment", "--config", path.to_str().unwrap()]);
    let b = run(&["experiment", "--scenario", "spectral", "--difficulty", "hard", "--trials", "2"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn eigenmatrix_build_and_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["eigenmatrix", "build", "--scenario", "spectral", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("eigenmatrix.json")).unwrap()).unwrap();
    let n_s = v["summary"]["n_s"].as_u64().unwrap() as usize;
    assert_eq!(n_s, 256);
    assert_eq!(v["matrix"].as_array().unwrap().len(), n_s);
    assert!(v["summary"]["norm"].as_f64().unwrap() <= 3.0 + 1e-9);
    assert!(v["residual"].as_f64().is_some());

    let out = run(&["grid", "--scenario", "rational", "--n-a", "8", "--no-auto-n-a", "--format", "csv"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().filter(|l| l.starts_with("probe,")).count(), 8);
    assert_eq!(text.lines().filter(|l| l.starts_with("sample,")).count(), 40);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["experiment"]).status.code(), Some(1));
    assert_eq!(run(&["experiment", "--scenario", "nope"]).status.code(), Some(1));
    assert_eq!(run(&["experiment", "--config", "/nonexistent/cfg.json"]).status.code(), Some(1));
    assert_eq!(run(&["experiment", "--scenario", "fourier", "--sigma=-1"]).status.code(), Some(1));
    assert_eq!(run(&["experiment", "--scenario", "fourier", "--n-x", "3", "--ell", "2"]).status.code(), Some(1));

    // all trials fail: the truth has zero weight, so the data vanish
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::scenario(Scenario::Fourier, Difficulty::Easy);
    cfg.trials = 2;
    cfg.truth = eigenmatrix::harness::TruthSpec::Explicit {
        model: SpikeModel::new(vec![C64::new(0.2, 0.0)], vec![C64::new(0.0, 0.0)]).unwrap(),
    };
    let path = dir.path().join("cfg.json");
    fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = run(&["experiment", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["aggregate"]["failed"].as_u64(), Some(2));
}
