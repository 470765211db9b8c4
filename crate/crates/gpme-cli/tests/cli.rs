//! End-to-end tests of the compiled binary: exit codes, stderr JSON
//! diagnostics, output determinism, and the emit-plot pipeline.

use std::path::Path;
use std::process::{Command, Output};

fn gpme(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpme"))
        .args(args)
        .current_dir(dir)
        .env_remove("GPME_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8(out.stderr.clone()).expect("utf8 stderr");
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr not JSON ({e}): {text}"))
}

const PATH_GRAPH: &str = r#"{"nodes":[{"id":"a","mu":1.0,"kappa":0.0},{"id":"b","mu":1.0,"kappa":0.0}],"edges":[{"u":"a","v":"b","w":1.0}]}"#;

fn write(dir: &Path, name: &str, content: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, content).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn resolve_on_family_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let g = write(tmp.path(), "g.json", r#"{"0": 1.0}"#);
    let out = gpme(
        &[
            "resolve",
            "--family",
            "half_line",
            "--phi",
            r#"{"family":"power_law","m":2}"#,
            "--lambda",
            "1",
            "--g",
            &g,
        ],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["kind"], "resolvent_solution");
    assert!(v["u"]["0"].as_f64().unwrap() > 0.0);
    assert!(v["truncation_level"].as_u64().unwrap() >= 2);
    assert_eq!(v["monotone_certificate"], serde_json::Value::Bool(true));
}

#[test]
fn resolve_is_deterministic_and_exact_on_isolated_node() {
    let tmp = tempfile::tempdir().unwrap();
    let graph = write(
        tmp.path(),
        "g.json",
        r#"{"nodes":[{"id":"a","mu":1.0,"kappa":0.0}],"edges":[]}"#,
    );
    let data = write(tmp.path(), "data.json", r#"{"a": 2.0}"#);
    let args = [
        "resolve",
        "--graph",
        &graph,
        "--phi",
        r#"{"family":"power_law","m":2}"#,
        "--lambda",
        "0.5",
        "--g",
        &data,
    ];
    let out1 = gpme(&args, tmp.path());
    let out2 = gpme(&args, tmp.path());
    assert!(out1.status.success());
    assert_eq!(out1.stdout, out2.stdout, "outputs differ between runs");
    let v: serde_json::Value = serde_json::from_str(&stdout(&out1)).unwrap();
    // No edges, no killing: the resolvent is the identity.
    assert!((v["u"]["a"].as_f64().unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn resolve_reads_csv_data() {
    let tmp = tempfile::tempdir().unwrap();
    let graph = write(tmp.path(), "g.json", PATH_GRAPH);
    let data = write(tmp.path(), "data.csv", "node,value\na,1.5\n");
    let out = gpme(
        &[
            "resolve",
            "--graph",
            &graph,
            "--phi",
            r#"{"family":"power_law","m":1}"#,
            "--lambda",
            "1",
            "--g",
            &data,
        ],
        tmp.path(),
    );
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let ua = v["u"]["a"].as_f64().unwrap();
    let ub = v["u"]["b"].as_f64().unwrap();
    assert!((ua + ub - 1.5).abs() < 1e-8, "mass split {ua} + {ub}");
    assert!(ua > ub);
}

#[test]
fn evolve_and_emit_plot_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let graph = write(tmp.path(), "g.json", PATH_GRAPH);
    let u0 = write(tmp.path(), "u0.json", r#"{"a": 1.0}"#);
    let forcing = write(
        tmp.path(),
        "f.json",
        r#"{"kind":"piecewise_constant","pieces":[{"start":0.0,"end":0.4,"value":{"b":0.5}},{"start":0.4,"end":1.0,"value":{}}]}"#,
    );
    let result = tmp.path().join("run.json").to_string_lossy().into_owned();
    let out = gpme(
        &[
            "evolve",
            "--graph",
            &graph,
            "--phi",
            r#"{"family":"power_law","m":2}"#,
            "--u0",
            &u0,
            "--forcing",
            &forcing,
            "--t-final",
            "1",
            "--epsilon",
            "0.25",
            "--out",
            &result,
        ],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&result).unwrap()).unwrap();
    assert_eq!(v["kind"], "evolution_result");
    // The forcing breakpoint 0.4 joins the uniform grid.
    let grid: Vec<f64> = v["grid"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert!(grid.contains(&0.4));
    assert_eq!(
        v["classic_regime"]["certified"],
        serde_json::Value::Bool(true)
    );

    let plot = gpme(&["emit-plot", "--input", &result], tmp.path());
    assert!(plot.status.success());
    let csv = stdout(&plot);
    assert!(csv.starts_with("t,node,value\n"), "{csv}");

    let norms = gpme(
        &["emit-plot", "--input", &result, "--what", "norms"],
        tmp.path(),
    );
    assert!(norms.status.success());
    let csv = stdout(&norms);
    assert!(csv.starts_with("t,l1_norm,mass\n"), "{csv}");
    assert_eq!(csv.lines().count(), 1 + grid.len());
}

#[test]
fn mild_evolution_reports_delta_estimate() {
    let tmp = tempfile::tempdir().unwrap();
    let graph = write(tmp.path(), "g.json", PATH_GRAPH);
    let u0 = write(tmp.path(), "u0.json", r#"{"a": 1.0}"#);
    let out = gpme(
        &[
            "evolve",
            "--graph",
            &graph,
            "--phi",
            r#"{"family":"power_law","m":1}"#,
            "--u0",
            &u0,
            "--t-final",
            "1",
            "--epsilon",
            "0.25",
            "--mild",
            "--mild-tol",
            "1e-4",
        ],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(!v["delta_estimate"].as_array().unwrap().is_empty());
}

#[test]
fn sign_changing_data_without_flags_is_refused_with_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let u0 = write(tmp.path(), "u0.json", r#"{"0": 1.0, "1": -1.0}"#);
    let out = gpme(
        &[
            "evolve",
            "--family",
            "half_line",
            "--no-assert-flags",
            "--phi",
            r#"{"family":"power_law","m":2}"#,
            "--u0",
            &u0,
            "--t-final",
            "0.5",
            "--epsilon",
            "0.25",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let diag = stderr_json(&out);
    assert_eq!(diag["code"], "hypothesis_violation");
    assert_eq!(diag["context"], "evolve");
    let reason = diag["reason"].as_str().unwrap();
    assert!(
        reason.contains("H1") && reason.contains("H2") && reason.contains("H3"),
        "{reason}"
    );
    // The same data on the flag-asserting family is accepted.
    let ok = gpme(
        &[
            "evolve",
            "--family",
            "half_line",
            "--phi",
            r#"{"family":"power_law","m":2}"#,
            "--u0",
            &u0,
            "--t-final",
            "0.5",
            "--epsilon",
            "0.25",
        ],
        tmp.path(),
    );
    assert!(
        ok.status.success(),
        "{}",
        String::from_utf8_lossy(&ok.stderr)
    );
}

#[test]
fn exponential_family_refuses_at_the_node_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let g = write(tmp.path(), "g.json", r#"{"1": 1.0}"#);
    let out = gpme(
        &[
            "resolve",
            "--family",
            "binary_tree",
            "--phi",
            r#"{"family":"power_law","m":0.5}"#,
            "--lambda",
            "0.5",
            "--g",
            &g,
            "--node-budget",
            "50",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let diag = stderr_json(&out);
    assert_eq!(diag["code"], "truncation_required");
    assert!(diag["reason"].as_str().unwrap().contains("node budget"));
}

#[test]
fn malformed_inputs_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad_graph = write(tmp.path(), "bad.json", r#"{"nodes": "oops"#);
    let data = write(tmp.path(), "data.json", r#"{"a": 1.0}"#);
    let out = gpme(
        &[
            "resolve",
            "--graph",
            &bad_graph,
            "--phi",
            r#"{"family":"power_law","m":2}"#,
            "--lambda",
            "1",
            "--g",
            &data,
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["code"], "parse_error");

    // Missing file.
    let out = gpme(
        &[
            "resolve",
            "--graph",
            "/nonexistent/graph.json",
            "--phi",
            r#"{"family":"power_law","m":2}"#,
            "--lambda",
            "1",
            "--g",
            &data,
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["code"], "io_error");

    // Both graph sources at once is a usage error (clap's exit code 2).
    let g2 = write(tmp.path(), "g2.json", PATH_GRAPH);
    let out = gpme(
        &[
            "resolve",
            "--graph",
            &g2,
            "--family",
            "half_line",
            "--phi",
            r#"{"family":"power_law","m":2}"#,
            "--lambda",
            "1",
            "--g",
            &data,
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_parameters_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let graph = write(tmp.path(), "g.json", PATH_GRAPH);
    let u0 = write(tmp.path(), "u0.json", r#"{"a": 1.0}"#);
    let out = gpme(
        &[
            "evolve",
            "--graph",
            &graph,
            "--phi",
            r#"{"family":"power_law","m":2}"#,
            "--u0",
            &u0,
            "--t-final=-1",
            "--epsilon",
            "0.25",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["code"], "invalid_argument");
}

#[test]
fn check_suites_report_and_exit() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gpme(
        &["check", "accretivity", "--seed", "7", "--cases", "5"],
        tmp.path(),
    );
    assert!(out.status.success());
    assert!(
        stdout(&out).contains("accretivity: 5/5 passed"),
        "{}",
        stdout(&out)
    );

    // Vacuous pass.
    let out = gpme(&["check", "comparison", "--cases", "0"], tmp.path());
    assert!(out.status.success());
    assert!(stdout(&out).contains("comparison: 0/0 passed"));

    // Determinism: same seed, same bytes.
    let a = gpme(
        &["check", "mass", "--seed", "3", "--cases", "3"],
        tmp.path(),
    );
    let b = gpme(
        &["check", "mass", "--seed", "3", "--cases", "3"],
        tmp.path(),
    );
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    // Unknown suite.
    let out = gpme(&["check", "bogus"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["code"], "invalid_argument");
}

#[test]
fn logging_goes_to_stderr_only() {
    let tmp = tempfile::tempdir().unwrap();
    let graph = write(tmp.path(), "g.json", PATH_GRAPH);
    let data = write(tmp.path(), "data.json", r#"{"a": 1.0}"#);
    let args = [
        "resolve",
        "--graph",
        &graph,
        "--phi",
        r#"{"family":"power_law","m":2}"#,
        "--lambda",
        "1",
        "--g",
        &data,
    ];
    let quiet = gpme(&args, tmp.path());
    let loud = Command::new(env!("CARGO_BIN_EXE_gpme"))
        .args(args)
        .current_dir(tmp.path())
        .env("GPME_LOG", "info")
        .output()
        .unwrap();
    assert!(loud.status.success());
    assert_eq!(quiet.stdout, loud.stdout, "logging must not touch stdout");
    assert!(String::from_utf8_lossy(&loud.stderr).contains("[info]"));
    assert!(quiet.stderr.is_empty());
}
