mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::configs_dir;

fn fogsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fogsim"))
        .args(args)
        .env_remove("FOGSIM_OUT")
        .output()
        .unwrap()
}

fn s1_config() -> String {
    configs_dir().join("s1.toml").display().to_string()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("exp.toml");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

const SMALL: &str = r#"
[topology.generator]
scenario = "uniform"
servers = 3
devices = 6

[workload.synthetic]
rate_per_s = 0.5

[simulation]
horizon_ms = 20000.0
replications = 4
"#;

#[test]
fn validate_accepts_presets() {
    for name in ["s1.toml", "uniform.toml", "hotspot.toml"] {
        let path = configs_dir().join(name).display().to_string();
        let out = fogsim(&["validate", "--config", &path]);
        assert!(
            out.status.success(),
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn invalid_config_lists_every_issue_and_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "policy = \"greedy\"\n[simulation]\nreplications = 0\nhorizon_ms = -1.0\n",
    );
    let out = fogsim(&[
        "run",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    for key in [
        "policy",
        "simulation.replications",
        "simulation.horizon_ms",
        "topology",
    ] {
        assert!(err.contains(key), "missing {key} in:\n{err}");
    }
}

#[test]
fn missing_config_file_exits_1() {
    let out = fogsim(&["validate", "--config", "/nonexistent/fogsim.toml"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_writes_one_row_per_replication() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("out");
    let out = fogsim(&[
        "run",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--policy",
        "non-cooperative",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = fs::read_to_string(out_dir.join("replications.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 4);
    assert!(rows
        .lines()
        .skip(1)
        .all(|l| l.starts_with("non-cooperative,")));
    for f in ["jobs.csv", "servers.csv", "summary.csv"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    assert!(!out_dir.join("trace_0.tsv").exists());
}

#[test]
fn flags_override_file_settings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("out");
    let out = fogsim(&[
        "run",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--replications",
        "2",
        "--seed",
        "40",
        "--trace",
        "on",
    ]);
    assert!(out.status.success());
    let rows = fs::read_to_string(out_dir.join("replications.csv")).unwrap();
    let seeds: Vec<&str> = rows
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap())
        .collect();
    assert_eq!(seeds, ["40", "41"]);
    assert!(out_dir.join("trace_1.tsv").exists());
}

#[test]
fn output_dir_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let env_out = dir.path().join("from_env");
    let out = Command::new(env!("CARGO_BIN_EXE_fogsim"))
        .args(["run", "--config", &cfg, "--replications", "1"])
        .env("FOGSIM_OUT", &env_out)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(env_out.join("summary.csv").exists());
}

#[test]
fn compare_prints_table_and_writes_charts() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("cmp");
    let out = fogsim(&[
        "compare",
        "--config",
        &s1_config(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("mean_processing_ms"));
    assert!(stdout.contains("-250.000"));
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    for f in [
        "processing_response_time.svg",
        "average_power.svg",
        "comparison.csv",
    ] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    assert!(out_dir.join("cooperative/jobs.csv").exists());
    assert!(out_dir.join("non-cooperative/jobs.csv").exists());

    let no_charts = dir.path().join("plain");
    let out = fogsim(&[
        "compare",
        "--config",
        &s1_config(),
        "--out",
        no_charts.to_str().unwrap(),
        "--charts",
        "off",
    ]);
    assert!(out.status.success());
    assert!(!no_charts.join("average_power.svg").exists());
}

#[test]
fn trace_refuses_multiple_replications() {
    let dir = tempfile::tempdir().unwrap();
    let out = fogsim(&[
        "trace",
        "--config",
        &s1_config(),
        "--replications",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("trace.tsv").exists());
}

#[test]
fn trace_lists_every_event_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = fogsim(&[
        "trace",
        "--config",
        &s1_config(),
        "--policy",
        "cooperative",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let trace = fs::read_to_string(dir.path().join("trace.tsv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert!(lines.iter().any(|l| l.contains("RedirectDispatched")));
    assert!(lines.last().unwrap().contains("SimulationEnd"));
    let times: Vec<f64> = lines
        .iter()
        .map(|l| l.split('\t').next().unwrap().parse().unwrap())
        .collect();
    assert!(times.windows(2).all(|w| w[0] <= w[1]));
    assert!(dir.path().join("jobs.csv").exists());
}

#[test]
fn empty_workload_trace_has_only_the_end_event() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[topology.generator]\nscenario = \"uniform\"\nservers = 2\ndevices = 2\n\
         [workload.synthetic]\nrate_per_s = 0.0\n[simulation]\nhorizon_ms = 1000.0\n",
    );
    let out = fogsim(&[
        "trace",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let trace = fs::read_to_string(dir.path().join("trace.tsv")).unwrap();
    assert_eq!(trace.lines().count(), 1);
    assert!(trace.contains("SimulationEnd"));
}
