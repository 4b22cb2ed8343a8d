use std::path::Path;
use std::process::Command;

use qutrit_transfer::cli::{run, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};
use qutrit_transfer::config::{parse_config, RunConfig};
use qutrit_transfer::experiments::{sweep_detuning, sweep_state_grid};
use qutrit_transfer::output::{read_csv, to_svg, write_csv};

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("qutrit-transfer").chain(args.iter().copied());
    let code = run(argv, None, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qutrit-transfer"))
}

#[test]
fn shipped_default_config_parses_to_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/default.conf");
    let text = std::fs::read_to_string(path).unwrap();
    let cfg = parse_config(&text).unwrap();
    let d = RunConfig::default();
    assert_eq!(cfg.scenario, d.scenario);
    assert_eq!(cfg.sweep, d.sweep);
}

#[test]
fn detuning_csv_has_one_row_per_point_and_round_trips() {
    let cfg = RunConfig::default();
    let result = sweep_detuning(&cfg.scenario, &cfg.sweep).unwrap();
    assert_eq!(result.rows.len(), 51);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("detuning.csv");
    write_csv(&path, &result, &cfg.metadata()).unwrap();
    let table = read_csv(&path).unwrap();
    assert_eq!(table.rows.len(), 51);
    assert_eq!(table.columns[..3], ["kappa_inv_us", "D", "fidelity"]);
    let fids = table.column("fidelity").unwrap();
    for (row, f) in result.rows.iter().zip(fids) {
        assert_eq!(row.fidelity.to_bits(), f.to_bits());
    }
    assert_eq!(table.meta("sweep"), Some("detuning"));
    assert_eq!(table.meta("config.kappa_inv_us"), Some("0.1 (default)"));
    assert!(table.meta("code_version").is_some());
    let svg = to_svg(&result).unwrap();
    assert_eq!(svg.matches("class=\"series\"").count(), 3);
}

#[test]
fn state_heatmap_has_one_cell_per_grid_point() {
    let cfg = parse_config("gamma_points = 3\ntheta_points = 4\n").unwrap();
    let result = sweep_state_grid(&cfg.scenario, &cfg.sweep).unwrap();
    assert_eq!(result.rows.len(), 12);
    let svg = to_svg(&result).unwrap();
    assert_eq!(svg.matches("class=\"cell\"").count(), 12);
    assert!(svg.contains(">gamma<") && svg.contains(">theta<"));
}

#[test]
fn transfer_prints_the_reference_numbers() {
    let (code, out, _) = cli(&["transfer"]);
    assert_eq!(code, EXIT_OK);
    for needle in ["fidelity", "lambda1", "lambda2", "t1", "t2", "Q_a", "Q_b", "peak photons"] {
        assert!(out.contains(needle), "missing {needle} in\n{out}");
    }
    let f: f64 = out.lines().next().unwrap().split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!((f - 0.9934).abs() <= 0.005, "F = {f}");
    assert!(out.contains("25.000000 ns") && out.contains("5.000000 ns"));
}

#[test]
fn sweep_subcommand_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("c.csv");
    let svg = dir.path().join("c.svg");
    let (code, out, err) = cli(&[
        "sweep-coupling",
        "--set",
        "c_points=2",
        "--set",
        "d_points=2",
        "--csv",
        csv.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.starts_with("4 points in "));
    assert_eq!(read_csv(&csv).unwrap().rows.len(), 4);
    assert_eq!(std::fs::read_to_string(&svg).unwrap().matches("class=\"cell\"").count(), 4);
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    std::fs::write(&path, "kappa_inv_us = 10\ncrosstalk = false\n").unwrap();
    let (code, out, _) = cli(&["--config", path.to_str().unwrap(), "transfer"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("Q_a               1.570796e5"));

    let (code, _, err) = cli(&["--config", path.to_str().unwrap(), "--set", "D=abc", "transfer"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("`D`"));

    let (code, _, err) = cli(&["--config", "/nonexistent/run.conf", "transfer"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("/nonexistent/run.conf"));
}

#[test]
fn runtime_failure_exits_one() {
    let (code, _, err) = cli(&["transfer", "--set", "max_steps=10"]);
    assert_eq!(code, EXIT_FAILURE);
    assert!(err.contains("error"));
}

#[test]
fn process_exit_codes() {
    let bad = binary().arg("frobnicate").output().unwrap();
    assert_eq!(bad.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("Usage"));

    let bad_key = binary().args(["transfer", "--set", "delta_GHz=-1"]).output().unwrap();
    assert_eq!(bad_key.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&bad_key.stderr).contains("delta_GHz"));

    let help = binary().arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(EXIT_OK));

    let defaults = binary().arg("default-config").output().unwrap();
    assert_eq!(defaults.status.code(), Some(EXIT_OK));
    assert!(parse_config(&String::from_utf8(defaults.stdout).unwrap()).is_ok());
}

#[test]
fn worker_env_override_is_validated() {
    let out = binary()
        .args(["sweep-coupling", "--set", "c_points=1", "--set", "c_max=0.95", "--set", "d_points=1", "--set", "d_max=0.95"])
        .env("QTRANSFER_WORKERS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&out.stderr).contains("QTRANSFER_WORKERS"));
}

#[test]
fn validate_passes_on_defaults() {
    let (code, out, _) = cli(&["validate"]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(!out.contains("FAIL"));
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 12);
}
