use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn posbuild(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_posbuild"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn solve(dir: &TempDir, body: &str) -> (Output, PathBuf) {
    let cfg = write_config(dir.path(), "config.json", body);
    let out = dir.path().join("out");
    let output = posbuild(&[
        "solve",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--quiet",
    ]);
    (output, out)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn read_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn equilibrium_mode_report() {
    let dir = TempDir::new().unwrap();
    let (output, out) = solve(
        &dir,
        r#"{"mode": "equilibrium", "kappa": 1, "lambda": 5, "n_terms": 20, "gamma": 0.8}"#,
    );
    assert_eq!(
        output.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert!(output.stdout.is_empty());
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["status"], "converged");
    let iterations = report["iterations"].as_u64().unwrap();
    assert!((10..=15).contains(&iterations));
    let ca = report["costs"]["final"][0].as_f64().unwrap();
    let cb = report["costs"]["final"][1].as_f64().unwrap();
    assert!((ca / 8.2 - 1.0).abs() < 0.05 && (cb / 46.2 - 1.0).abs() < 0.05);
    assert!(report["comparison"]["l2_a"].as_f64().unwrap() < 5e-3);

    let coeffs = read_json(&out.join("coefficients.json"));
    assert_eq!(coeffs["n_terms"], 20);
    assert_eq!(coeffs["a"].as_array().unwrap().len(), 20);

    let (header, rows) = read_rows(&out.join("strategies.csv"));
    assert_eq!(header, ["t", "a", "b", "a_closed_form", "b_closed_form"]);
    assert_eq!(rows.len(), 201);
    assert_eq!(&rows[0][..3], &[0.0, 0.0, 0.0]);
    assert_eq!(&rows[200][..3], &[1.0, 1.0, 1.0]);

    let mut states = csv::Reader::from_path(out.join("state_space.csv")).unwrap();
    let phases: Vec<String> = states
        .records()
        .map(|r| r.unwrap()[0].to_string())
        .collect();
    assert_eq!(phases.len() as u64, 1 + 2 * iterations);
    assert_eq!(phases[0], "init");
    assert_eq!(phases[1], "step_a");
    assert_eq!(phases[2], "step_b");
}

#[test]
fn no_sell_best_response_is_monotone() {
    let dir = TempDir::new().unwrap();
    let (output, out) = solve(
        &dir,
        r#"{"mode": "best_response", "kappa": 0.5, "lambda": 1, "sigma": 3, "n_terms": 20,
            "adversary": {"passive": "eager"}, "constraints_a": [{"kind": "no_sell"}]}"#,
    );
    assert_eq!(output.status.code(), Some(0));
    let (header, rows) = read_rows(&out.join("strategies.csv"));
    assert_eq!(header, ["t", "a", "b", "a_closed_form", "b_closed_form"]);
    for w in rows.windows(2) {
        assert!(w[1][1] >= w[0][1] - 1e-6, "a decreases at t = {}", w[1][0]);
    }
}

#[test]
fn closed_form_symmetric_pair() {
    let dir = TempDir::new().unwrap();
    let (output, out) = solve(
        &dir,
        r#"{"mode": "closed_form", "kappa": 25, "lambda": 1, "n_terms": 20}"#,
    );
    assert_eq!(output.status.code(), Some(0));
    let (header, rows) = read_rows(&out.join("strategies.csv"));
    assert_eq!(header, ["t", "a", "b"]);
    for row in &rows {
        assert_eq!(row[1], row[2]);
    }
    assert_eq!(&rows[0], &[0.0, 0.0, 0.0]);
    assert_eq!(rows.last().unwrap(), &[1.0, 1.0, 1.0]);
    let (header, rows) = read_rows(&out.join("state_space.csv"));
    assert_eq!(header, ["phase", "iteration", "cost_a", "cost_b"]);
    assert!(rows.is_empty());
}

#[test]
fn coefficient_file_adversary_round_trips() {
    let dir = TempDir::new().unwrap();
    let (output, out) = solve(
        &dir,
        r#"{"mode": "equilibrium", "kappa": 1, "lambda": 5, "n_terms": 20, "gamma": 0.8}"#,
    );
    assert_eq!(output.status.code(), Some(0));
    fs::rename(out.join("coefficients.json"), dir.path().join("eq.json")).unwrap();
    let (output, out) = solve(
        &dir,
        r#"{"mode": "best_response", "kappa": 1, "lambda": 5, "n_terms": 20, "adversary": {"coefficients": "eq.json"}}"#,
    );
    assert_eq!(
        output.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let eq: Value = read_json(&dir.path().join("eq.json"));
    let br = read_json(&out.join("coefficients.json"));
    for (x, y) in br["a"]
        .as_array()
        .unwrap()
        .iter()
        .zip(eq["a"].as_array().unwrap())
    {
        assert!((x.as_f64().unwrap() - y.as_f64().unwrap()).abs() < 1e-4);
    }
}

#[test]
fn divergence_exits_3_with_artifacts() {
    let dir = TempDir::new().unwrap();
    let (output, out) = solve(
        &dir,
        r#"{"mode": "equilibrium", "kappa": 25, "lambda": 1, "n_terms": 35, "gamma": 1.0}"#,
    );
    assert_eq!(output.status.code(), Some(3));
    for f in [
        "strategies.csv",
        "state_space.csv",
        "report.json",
        "coefficients.json",
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["status"], "diverged");
    assert_eq!(report["exit_code"], 3);
    let (_, states) = read_rows_text(&out.join("state_space.csv"));
    assert!(states.len() > 3);
}

fn read_rows_text(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

#[test]
fn iteration_cap_exits_3() {
    let dir = TempDir::new().unwrap();
    let (output, out) = solve(
        &dir,
        r#"{"mode": "equilibrium", "kappa": 25, "lambda": 1, "n_terms": 10, "gamma": 0.2, "max_iterations": 3}"#,
    );
    assert_eq!(output.status.code(), Some(3));
    assert_eq!(
        read_json(&out.join("report.json"))["status"],
        "max_iterations"
    );
}

#[test]
fn config_errors_exit_2_and_name_the_key() {
    let dir = TempDir::new().unwrap();
    let (output, _) = solve(
        &dir,
        r#"{"mode": "equilibrium", "kappa": 1, "lambda": 5, "n_terms": 20, "gama": 0.8}"#,
    );
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("gama"));

    let (output, _) = solve(
        &dir,
        r#"{"mode": "equilibrium", "kappa": 1, "lambda": 0, "n_terms": 20}"#,
    );
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("lambda"));

    let (output, _) = solve(
        &dir,
        r#"{"mode": "equilibrium", "kappa": 1, "lambda": 1, "n_terms": 20,
            "constraints_a": [{"kind": "channel", "lower": 0.5, "upper": 0.2}]}"#,
    );
    assert_eq!(
        output.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );

    let (output, _) = solve(&dir, "{ not json");
    assert_eq!(output.status.code(), Some(2));

    let output = posbuild(&["solve", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn seedless_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"mode": "closed_form", "kappa": 1, "lambda": 1, "n_terms": 5}"#,
    );
    let output = posbuild(&["solve", cfg.to_str().unwrap(), "--seedless"]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("--seedless"));
    assert!(!dir.path().join("output").exists());
}

#[test]
fn output_defaults_to_config_directory() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"mode": "closed_form", "kappa": 1, "lambda": 1, "n_terms": 5, "output": "results"}"#,
    );
    let output = posbuild(&["solve", cfg.to_str().unwrap(), "--quiet"]);
    assert_eq!(output.status.code(), Some(0));
    assert!(dir.path().join("results/report.json").is_file());
}

#[test]
fn empty_sweep_writes_header_only() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.json",
        r#"{"mode": "sweep", "kappa": 5, "lambda": 1, "n_terms": 10, "sweep": {"gamma": []}}"#,
    );
    let out = dir.path().join("out");
    let output = posbuild(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(output.status.code(), Some(0));
    let text = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("cell,kappa,lambda,gamma,n_terms,status,iterations,l2_a,l2_b,cost_a_final,cost_b_final,exit_code"));
}

#[test]
fn sweep_continues_past_failing_cells() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.json",
        r#"{"mode": "sweep", "kappa": 25, "lambda": 1, "n_terms": 12, "sweep": {"gamma": [0.2, 1.0]}}"#,
    );
    let out = dir.path().join("out");
    let output = posbuild(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(output.status.code(), Some(3));
    let (_, rows) = read_rows_text(&out.join("summary.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][5], "converged");
    assert_eq!(rows[1][5], "diverged");
    assert!(out.join(&rows[1][0]).join("state_space.csv").is_file());
}

#[test]
fn solve_refuses_sweep_configs() {
    let dir = TempDir::new().unwrap();
    let (output, _) = solve(
        &dir,
        r#"{"mode": "sweep", "kappa": 5, "lambda": 1, "n_terms": 10}"#,
    );
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let body = r#"{"mode": "equilibrium", "kappa": 3, "lambda": 2, "n_terms": 15, "gamma": 0.5,
                   "constraints_a": [{"kind": "overbuy", "rho": 0.1}]}"#;
    let cfg = write_config(dir.path(), "c.json", body);
    let mut outputs = Vec::new();
    for run in ["one", "two"] {
        let out = dir.path().join(run);
        let output = posbuild(&[
            "solve",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--quiet",
        ]);
        assert_eq!(output.status.code(), Some(0));
        outputs.push(out);
    }
    for f in [
        "strategies.csv",
        "state_space.csv",
        "report.json",
        "coefficients.json",
    ] {
        assert_eq!(
            fs::read(outputs[0].join(f)).unwrap(),
            fs::read(outputs[1].join(f)).unwrap(),
            "{f}"
        );
    }
}

fn sweep_rows(dir: &TempDir, body: &str) -> Vec<Vec<String>> {
    let cfg = write_config(dir.path(), "s.json", body);
    let out = dir.path().join("out");
    let output = posbuild(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(
        output.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    read_rows_text(&out.join("summary.csv")).1
}

#[test]
fn gamma_sweep_iterations_fall() {
    let dir = TempDir::new().unwrap();
    let rows = sweep_rows(
        &dir,
        r#"{"mode": "sweep", "kappa": 5, "lambda": 1, "n_terms": 20, "sweep": {"gamma": [0.2, 0.4, 0.6, 0.8, 1.0]}}"#,
    );
    let iterations: Vec<usize> = rows.iter().map(|r| r[6].parse().unwrap()).collect();
    assert_eq!(iterations.len(), 5);
    assert!(rows.iter().all(|r| r[5] == "converged"));
    assert!(
        iterations.windows(2).all(|w| w[1] <= w[0]),
        "{iterations:?}"
    );
}

#[test]
fn truncation_sweep_error_ratio() {
    let dir = TempDir::new().unwrap();
    let rows = sweep_rows(
        &dir,
        r#"{"mode": "sweep", "kappa": 20, "lambda": 1, "n_terms": 10, "gamma": 0.2, "sweep": {"n_terms": [10, 30]}}"#,
    );
    let l2 = |r: &Vec<String>| r[7].parse::<f64>().unwrap().max(r[8].parse().unwrap());
    let ratio = l2(&rows[0]) / l2(&rows[1]);
    assert!(ratio > 5.0 && ratio < 25.0, "{ratio}");
}
