//! Black-box checks of the command-line binary: exit codes, determinism of
//! written artifacts, config rejection, and the shape of the emitted files.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mblab"))
}

fn run_args(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn read_csv_column(path: &Path, wanted: &str) -> Vec<f64> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header
        .iter()
        .position(|h| *h == wanted)
        .unwrap_or_else(|| panic!("column {wanted} missing from {header:?}"));
    lines
        .map(|l| l.split(',').nth(idx).unwrap().parse().unwrap())
        .collect()
}

const SIM_CONFIG: &str = "\
[run]
experiment = simulate
seeds = 7

[model]
alpha = 1/2
s = 2.0

[grid]
n = 16

[time]
dt = 1e-3
t_end = 0.2
";

#[test]
fn no_arguments_and_help_exit_codes() {
    let none = run_args(&[]);
    assert_eq!(none.status.code(), Some(2));
    let help = run_args(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("usage: mblab"));
}

#[test]
fn same_config_reproduces_identical_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "sim.ini", SIM_CONFIG);
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    for out in [&out_a, &out_b] {
        let r = run_args(&["simulate", "--config", &cfg, "--out", &out.to_string_lossy()]);
        assert_eq!(
            r.status.code(),
            Some(0),
            "stderr: {}",
            String::from_utf8_lossy(&r.stderr)
        );
    }
    let diag_a = std::fs::read(out_a.join("diag.csv")).unwrap();
    let diag_b = std::fs::read(out_b.join("diag.csv")).unwrap();
    assert!(!diag_a.is_empty() && diag_a == diag_b, "diag.csv differs between runs");

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_a.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["completed"], serde_json::json!(true));
    assert_eq!(manifest["experiment"], serde_json::json!("simulate"));
    assert!(manifest["wall_seconds"].as_f64().is_some());
}

#[test]
fn undersized_physical_grid_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SIM_CONFIG.replace("n = 16", "n = 16\nm = 40");
    let cfg = write_config(tmp.path(), "bad.ini", &text);
    let r = run_args(&["simulate", "--config", &cfg, "--out", &tmp.path().join("o").to_string_lossy()]);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("grid.m"), "stderr was: {err}");
}

#[test]
fn zero_data_run_completes_with_flat_series() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "{SIM_CONFIG}\n[data]\nkind = modes\nu_modes = 1:0\nv_modes = 1:0\n"
    );
    let cfg = write_config(tmp.path(), "zero.ini", &text);
    let out = tmp.path().join("o");
    let r = run_args(&["simulate", "--config", &cfg, "--out", &out.to_string_lossy()]);
    assert_eq!(
        r.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&r.stderr)
    );
    let e3 = read_csv_column(&out.join("diag.csv"), "e3");
    assert!(!e3.is_empty());
    assert!(e3.iter().all(|&x| x == 0.0), "zero data should stay zero");
}

#[test]
fn smoothing_cookbook_config_writes_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/smoothing.ini");
    let out = tmp.path().join("sm");
    let r = run_args(&[
        "smoothing",
        "--config",
        cfg,
        "--out",
        &out.to_string_lossy(),
        "--override",
        "grid.n=16",
        "--override",
        "time.dt=1e-3",
        "--override",
        "time.t_end=0.5",
        "--override",
        "run.seeds=1,2",
    ]);
    assert_eq!(
        r.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&r.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("smoothing.json")).unwrap())
            .unwrap();
    assert!(report.get("slope_gap").is_some(), "report lacks slope_gap");
    assert!(report["solution_fit"]["slope"].as_f64().is_some());
    assert_eq!(report["seeds_used"], serde_json::json!([1, 2]));
    let norms = std::fs::read_to_string(out.join("residual_norms.csv")).unwrap();
    assert!(norms.starts_with("t,"), "unexpected series header: {norms}");
}

#[test]
fn classify_subcommand_prints_classification_json() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("c");
    let r = run_args(&["classify-alpha", "1/3", "--out", &out.to_string_lossy()]);
    assert_eq!(
        r.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&r.stderr)
    );
    let stdout = String::from_utf8_lossy(&r.stdout);
    let json_start = stdout.find('{').expect("stdout carries JSON");
    let json_text = &stdout[json_start..stdout.rfind('}').unwrap() + 1];
    let report: serde_json::Value = serde_json::from_str(json_text).unwrap();
    assert_eq!(report["value"], serde_json::json!("1/3"));
    assert_eq!(report["kind"]["kind"], serde_json::json!("rational_nonspecial"));
    assert!((report["alpha"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);
    let on_disk: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("classification.json")).unwrap())
            .unwrap();
    assert_eq!(on_disk["kind"], report["kind"]);
}
