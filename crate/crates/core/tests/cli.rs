use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kg-spectra")).args(args).env_remove("KG_SPECTRA_CONFIG").output().unwrap()
}

fn run_env(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kg-spectra")).args(args).env("KG_SPECTRA_CONFIG", config).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

const SOLVE_FIELDS: [&str; 9] = ["potential", "d", "m", "state", "energy", "nodes", "norm_error", "mismatch_residual", "config"];

#[test]
fn solve_reports_the_documented_fields() {
    let out = run(&["solve", "--potential", "rational4:v=2", "--d", "3", "--l", "0", "--m", "1", "--state", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    for key in SOLVE_FIELDS {
        assert!(doc.get(key).is_some(), "missing {key}");
    }
    assert_eq!(doc["l"], 0);
    assert!(doc.get("parity").is_none());
    assert!((doc["energy"].as_f64().unwrap() - 0.7464).abs() <= 5e-4);

    let out = run(&["solve", "--potential", "coulomb:v=0.4", "--d", "3", "--l", "0", "--m", "1", "--state", "0"]);
    let e = json(&out)["energy"].as_f64().unwrap();
    assert!((e - 0.894427).abs() <= 1e-6);
}

#[test]
fn one_dimensional_solve_reports_parity() {
    let out = run(&["solve", "--potential", "cutoff-coulomb:v=0.5,a=1", "--d", "1", "--parity", "odd"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["parity"], "odd");
    assert!(doc.get("l").is_none());
}

#[test]
fn usage_and_nonconvergence_exit_codes() {
    let out = run(&["solve", "--d", "3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--potential"));

    assert_eq!(run(&["solve", "--potential", "coulomb:v=-1"]).status.code(), Some(1));
    assert_eq!(run(&["solve", "--potential", "coulomb:v=0.4", "--bogus"]).status.code(), Some(1));

    let out = run(&["solve", "--potential", "square-well:v=0.05,R=1", "--d", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("not bound"));
}

#[test]
fn compare_exit_codes() {
    let out = run(&["compare", "--potential-a", "rational4:v=2", "--potential-b", "exponential:v=2,b=1"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["ordering_ok"], true);
    assert_eq!(doc["hypotheses_ok"], true);

    let same = run(&["compare", "--potential-a", "exponential:v=2,b=1", "--potential-b", "exponential:v=2,b=1"]);
    assert_eq!(same.status.code(), Some(0));
    assert_eq!(json(&same)["residual"], 0.0);

    let crossing = run(&["compare", "--potential-a", "square-well:v=1.5,R=1", "--potential-b", "exponential:v=2,b=1"]);
    assert_eq!(crossing.status.code(), Some(0));
    assert_eq!(json(&crossing)["hypotheses_ok"], false);
    assert_eq!(json(&crossing)["verdict"], Value::Null);
}

#[test]
fn sweep_csv_layout() {
    let out = run(&[
        "sweep", "--potential", "cutoff-coulomb:v=0.5,a=1", "--d", "1", "--sweep-param", "a", "--from", "0.5", "--to",
        "4", "--points", "4", "--spacing", "log",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("a,E,dE_hf,dE_fd,nodes,converged"));
    let rows: Vec<Vec<f64>> =
        lines.map(|l| l.split(',').map(|x| x.parse::<f64>().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r[2] >= 0.0 && r[5] == 1.0));

    let one = run(&["sweep", "--potential", "coulomb:v=0.3", "--sweep-param", "v", "--from", "0.3", "--to", "0.3", "--points", "1"]);
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(String::from_utf8(one.stdout).unwrap().lines().count(), 2);

    assert_eq!(
        run(&["sweep", "--potential", "coulomb:v=0.3", "--sweep-param", "a", "--from", "0.1", "--to", "0.3"]).status.code(),
        Some(1)
    );
}

#[test]
fn thread_count_does_not_change_output() {
    let args = |threads: &'static str| {
        vec![
            "sweep", "--potential", "exponential:v=2,b=1", "--sweep-param", "b", "--from", "0.8", "--to", "1.6",
            "--points", "5", "--threads", threads,
        ]
    };
    let one = run(&args("1"));
    let eight = run(&args("8"));
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, eight.stdout);
}

#[test]
fn curve_writes_csv_fold_comment_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("curve.csv");
    let out = run(&[
        "curve", "--potential", "cutoff-coulomb:v=0.1,a=0.01", "--d", "1", "--e-from", "-0.9", "--e-to", "0.9",
        "--e-points", "19", "--out", out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(text.starts_with("branch_pos,a,E,dE_hf,nodes,solved_by\n"));
    let folds: Vec<&str> = text.lines().filter(|l| l.starts_with("# fold a=")).collect();
    assert_eq!(folds.len(), 1);
    let e_star: f64 = folds[0].split("E=").nth(1).unwrap().parse().unwrap();
    assert!(e_star < 0.0);

    let data = std::fs::read_to_string(dir.path().join("curve.csv.gp-data")).unwrap();
    let rows = data.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, text.lines().filter(|l| !l.starts_with('#')).count() - 1);
    assert!(data.lines().skip(1).all(|l| l.split(' ').count() == 2));
}

#[test]
fn curve_on_a_single_valued_stretch_has_no_fold() {
    let out = run(&["curve", "--potential", "cutoff-coulomb:v=0.5,a=1", "--d", "1", "--e-from", "0.3", "--e-to", "0.6", "--e-points", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(!String::from_utf8(out.stdout).unwrap().contains("# fold"));
}

#[test]
fn curve_energy_must_lie_in_the_window() {
    let out = run(&["curve", "--potential", "cutoff-coulomb:v=0.5,a=1", "--d", "1", "--e-from", "2", "--e-to", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"output": "csv", "solver": {"e_tol": 1e-9}}"#).unwrap();

    // config file applies
    let out = run(&["--config", cfg.to_str().unwrap(), "solve", "--potential", "coulomb:v=0.4"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("potential,d,l,parity"));

    // flag overrides the file, field by field
    let out = run(&["solve", "--potential", "coulomb:v=0.4", "--config", cfg.to_str().unwrap(), "--output", "json"]);
    let doc = json(&out);
    assert_eq!(doc["config"]["e_tol"], 1e-9);

    // environment variable names the default file
    let out = run_env(&["solve", "--potential", "coulomb:v=0.4"], &cfg);
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("potential,"));

    std::fs::write(&cfg, r#"{"solver": {"e_tol": -1}}"#).unwrap();
    assert_eq!(run(&["--config", cfg.to_str().unwrap(), "solve", "--potential", "coulomb:v=0.4"]).status.code(), Some(1));
    std::fs::write(&cfg, r#"{"unknown": 1}"#).unwrap();
    assert_eq!(run(&["--config", cfg.to_str().unwrap(), "solve", "--potential", "coulomb:v=0.4"]).status.code(), Some(1));
}
