//! End-to-end runs of the `qcollapse` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qcollapse::config::parse_scenario;
use qcollapse::snapshot::load_snapshot;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn qcollapse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcollapse"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// The single per-invocation directory under `parent`.
fn only_dir(parent: &Path) -> PathBuf {
    let dirs: Vec<PathBuf> = fs::read_dir(parent)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_dir())
        .collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.into_iter().next().unwrap()
}

fn config(name: &str) -> String {
    configs().join(name).display().to_string()
}

#[test]
fn rates_table_prints() {
    let out = qcollapse(&["rates", "--params", &config("rates.toml")]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("pointer"), "{text}");

    let out = qcollapse(&["rates", "--params", &config("rates.toml"), "--format", "csv"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("label,formula,rate_per_s,rate_f64\n"));
}

#[test]
fn bad_rates_file_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    fs::write(
        &path,
        "[[rows]]\nlabel = \"x\"\nformula = \"microscopic\"\ninputs = {}\n",
    )
    .unwrap();
    let out = qcollapse(&["rates", "--params", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let out = qcollapse(&["rates", "--params", "/nonexistent/rates.toml"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn bad_configs_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().display().to_string();
    let unknown = tmp.path().join("unknown.toml");
    let text = fs::read_to_string(configs().join("free_gaussian.toml")).unwrap();
    fs::write(&unknown, format!("colour = \"red\"\n{text}")).unwrap();
    let out = qcollapse(&["run", "--config", unknown.to_str().unwrap(), "--out", &out_dir]);
    assert_eq!(code(&out), 2);

    let free = config("free_gaussian.toml");
    for bad in [
        "collapse.gamma_L",
        "collapse.nonsense=1",
        "time.dt=-1.0",
        "grid.points=abc",
    ] {
        let out = qcollapse(&["run", "--config", &free, "--set", bad, "--out", &out_dir]);
        assert_eq!(code(&out), 2, "--set {bad}");
    }
    assert_eq!(
        fs::read_dir(tmp.path()).unwrap().count(),
        1,
        "only the input file remains"
    );
}

#[test]
fn run_writes_outputs_and_echoes_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let free = config("free_gaussian.toml");
    let out = qcollapse(&[
        "run",
        "--config",
        &free,
        "--set",
        "time.duration=0.5",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let dir = only_dir(tmp.path());
    for f in [
        "input.toml",
        "config.toml",
        "record.csv",
        "trajectory.csv",
        "summary.json",
    ] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    let resolved = parse_scenario(dir.join("config.toml"), &[]).unwrap();
    let mut expected = parse_scenario(&free, &[]).unwrap();
    expected.time.duration = 0.5;
    assert_eq!(resolved, expected);

    let record = fs::read_to_string(dir.join("record.csv")).unwrap();
    assert!(record.starts_with("step,time,norm,"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert!(summary.is_object());
}

#[test]
fn snapshots_can_be_reloaded() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qcollapse(&[
        "run",
        "--config",
        &config("collapse_rate.toml"),
        "--set",
        "time.duration=0.1",
        "--set",
        "output.snapshot_stride=10",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let snaps = only_dir(tmp.path()).join("snapshots");
    let mut names: Vec<String> = fs::read_dir(&snaps)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names, ["psi_0000000.bin", "psi_0000010.bin", "psi_0000020.bin"]);
    let psi = load_snapshot(snaps.join("psi_0000020.bin")).unwrap();
    assert!((psi.time() - 0.1).abs() < 1e-12);
    assert_eq!(psi.grid().points(), 256);
}

#[test]
fn small_ensemble_with_long_trajectories() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qcollapse(&[
        "ensemble",
        "--config",
        &config("born_rule.toml"),
        "--set",
        "ensemble.size=4",
        "--set",
        "time.duration=1.0",
        "--trajectories",
        "long",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let dir = only_dir(tmp.path());
    let outcomes = fs::read_to_string(dir.join("outcomes.csv")).unwrap();
    assert_eq!(outcomes.lines().count(), 5);
    let traj = fs::read_to_string(dir.join("trajectories.csv")).unwrap();
    assert!(traj.starts_with("realization,seed,time,q_1\n"));
    assert!(dir.join("summary.json").is_file());
}

#[test]
fn sample_draws_the_requested_count() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qcollapse(&[
        "sample",
        "--config",
        &config("born_rule.toml"),
        "--count",
        "5",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let samples = fs::read_to_string(only_dir(tmp.path()).join("samples.csv")).unwrap();
    let lines: Vec<&str> = samples.lines().collect();
    assert_eq!(lines[0], "sample,seed,q_1");
    assert_eq!(lines.len(), 6);
}

#[test]
fn quick_validation_passes_and_notices_a_fault() {
    let out = qcollapse(&["validate"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let out = qcollapse(&["--inject-fault", "validate"]);
    assert_eq!(code(&out), 1);
    let text = stdout(&out);
    assert!(text.contains("FAIL branch-dominance"), "{text}");
}

#[test]
fn oversized_step_fails_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qcollapse(&[
        "run",
        "--config",
        &config("free_gaussian.toml"),
        "--set",
        "collapse.gamma_L=500",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    // the partial record is still written
    assert!(only_dir(tmp.path()).join("record.csv").is_file());
}
