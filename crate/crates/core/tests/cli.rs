//! End-to-end runs of the `qtypic` binary.

use std::path::Path;
use std::process::{Command, Output};

use jsonschema::JSONSchema;
use serde_json::Value;

fn qtypic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qtypic"))
        .args(args)
        .env_remove("QTYPIC_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn schema(name: &str) -> JSONSchema {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schema")
        .join(name);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    JSONSchema::compile(&doc).expect("schema compiles")
}

fn assert_valid(schema: &JSONSchema, doc: &Value) {
    if let Err(errors) = schema.validate(doc) {
        let msgs: Vec<String> = errors
            .map(|e| format!("{e} at {}", e.instance_path))
            .collect();
        panic!("schema violations: {msgs:?}");
    }
}

fn export(dir: &Path, which: &[&str]) -> std::path::PathBuf {
    let mut args = vec!["scenario"];
    args.extend_from_slice(which);
    args.push("--export");
    let out = qtypic(&args);
    assert_eq!(out.status.code(), Some(0));
    let path = dir.join(format!("{}.json", which.join("-")));
    std::fs::write(&path, &out.stdout).unwrap();
    path
}

#[test]
fn scenario_output_is_deterministic() {
    let a = qtypic(&["scenario", "unruh", "--detector-d2"]);
    let b = qtypic(&["scenario", "unruh", "--detector-d2"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn reports_match_schema() {
    let report = schema("report.schema.json");
    let runs: [&[&str]; 5] = [
        &["scenario", "unruh"],
        &["scenario", "fig1"],
        &["scenario", "nonadditivity"],
        &["audit", "--builtin", "unruh"],
        &["--format", "json", "stat-bound", "--N", "8"],
    ];
    for args in runs {
        let out = qtypic(args);
        assert_eq!(out.status.code(), Some(0), "{args:?}");
        let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_valid(&report, &doc);
        assert_eq!(doc["tool"], "qtypic");
    }
}

#[test]
fn exported_scenarios_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = schema("scenario.schema.json");
    let unruh = export(dir.path(), &["unruh"]);
    let fig1 = export(dir.path(), &["fig1"]);
    for path in [&unruh, &fig1] {
        let doc: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        assert_valid(&scenario, &doc);
    }

    let unruh = unruh.to_str().unwrap();
    let out = qtypic(&[
        "typicality",
        "--scenario",
        unruh,
        "--s1",
        "1:U",
        "--s2",
        "3:D",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["result"]["report"]["verdict"], "MutuallyTypical");

    let out = qtypic(&["graph", "--scenario", unruh]);
    assert_eq!(out.status.code(), Some(0));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(
        doc["result"]["paths"],
        serde_json::json!([["U1", "U2", "D3"], ["D1", "U2", "U3"]])
    );

    let out = qtypic(&["audit", "--scenario", fig1.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn stat_bound_csv_row() {
    let out = qtypic(&["stat-bound", "--n", "2", "--N", "16", "--eps", "0.125"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(
        rows,
        [
            "n,N,eps,mass,bound,holds",
            "2,16,0.125,0.076812744140625,0.5,true"
        ]
    );
}

#[test]
fn bad_input_exits_2() {
    assert_eq!(qtypic(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(
        qtypic(&["stat-bound", "--p", "0.5,0.6"]).status.code(),
        Some(2)
    );
    assert_eq!(
        qtypic(&["--tau-link", "-1", "scenario", "fig1"])
            .status
            .code(),
        Some(2)
    );
    let out = qtypic(&[
        "typicality",
        "--scenario",
        "/nonexistent/x.json",
        "--s1",
        "0:A",
        "--s2",
        "0:B",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn oversized_experiment_exits_3() {
    let out = qtypic(&["stat-bound", "--n", "10", "--N", "40"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("limit"));
}

#[test]
fn mismatched_stochastic_section_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let path = export(dir.path(), &["fig1"]);
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    // Swap the first kernel for the identity so the second marginal is wrong.
    doc["stochastic"]["kernels"][0] = serde_json::json!([[1.0, 0.0], [0.0, 1.0]]);
    std::fs::write(&path, serde_json::to_vec(&doc).unwrap()).unwrap();
    let out = qtypic(&["audit", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["result"]["passed"], false);
}

#[test]
fn out_dir_variable_redirects_output() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_qtypic"))
        .args(["stat-bound", "--N", "4"])
        .env("QTYPIC_OUT_DIR", dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let written = std::fs::read_to_string(dir.path().join("stat-bound.csv")).unwrap();
    assert!(written.contains("n,N,eps,mass,bound,holds"));
}
