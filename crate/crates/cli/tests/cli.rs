use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn jobs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("jobs")
}

fn l1h(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_l1h"))
        .args(args)
        .env("L1H_LOG", "off")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn job(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn spec(name: &str) -> String {
    jobs().join(name).to_str().unwrap().to_string()
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,f(x),g*(x),residual"));
    lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
}

#[test]
fn canonical_cubic_points() {
    let out = l1h(&["canonical", "--spec", &spec("cubic_step.json")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let h = 3f64.sqrt() / 2.0;
    let expected = [-h, -0.5, 0.0, 0.5, h];
    let got = floats(&v["points"]);
    assert_eq!(got.len(), 5);
    for (g, e) in got.iter().zip(expected) {
        assert!((g - e).abs() < 1e-12, "{got:?}");
    }
    assert!(v["residual_inf_norm"].as_f64().unwrap() < 1e-12);
}

#[test]
fn canonical_linear_and_spline_points() {
    let dir = tempfile::tempdir().unwrap();
    let linear = job(
        dir.path(),
        "linear.json",
        r#"{"function":{"domain":[-1,1],"jump":0,"left":0,"right":1},
            "space":{"type":"polynomial","degree":1},"actions":["canonical"]}"#,
    );
    let v = json(&l1h(&["canonical", "--spec", &linear]));
    let h = 2f64.sqrt() / 2.0;
    for (g, e) in floats(&v["points"]).iter().zip([-h, 0.0, h]) {
        assert!((g - e).abs() < 1e-12);
    }

    let out = l1h(&["canonical", "--spec", &spec("hermite_splines.json")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let points = floats(&v["points"]);
    assert_eq!(points.len(), 11);
    for (a, b) in points.iter().zip(points.iter().rev()) {
        assert!((a + b).abs() < 1e-12);
    }
    assert!(v["residual_inf_norm"].as_f64().unwrap() < 1e-10);
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for i in 0..2 {
        let csv = dir.path().join(format!("run{i}.csv"));
        let out = l1h(&["run", "--spec", &spec("hermite_splines.json"), "--csv", csv.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
        runs.push((out.stdout, fs::read(&csv).unwrap()));
    }
    // the csv path differs between runs; everything else must match byte for byte
    let strip = |s: &[u8]| String::from_utf8_lossy(s).lines().filter(|l| !l.contains(".csv")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(&runs[0].0), strip(&runs[1].0));
    assert_eq!(runs[0].1, runs[1].1);
}

#[test]
fn approximant_round_trips_through_json() {
    let dir = tempfile::tempdir().unwrap();
    let saved = dir.path().join("approx.json");
    let out = l1h(&["approximate", "--spec", &spec("hermite_splines.json"), "--out", saved.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let first: Value = serde_json::from_str(&fs::read_to_string(&saved).unwrap()).unwrap();

    let out = l1h(&[
        "verify",
        "--spec",
        &spec("hermite_splines.json"),
        "--approximant",
        saved.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(floats(&report["coefficients"]), floats(&first["coefficients"]));
    let a = first["l1_error"].as_f64().unwrap();
    let b = report["l1_error"].as_f64().unwrap();
    assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
}

#[test]
fn approximant_from_another_space_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let saved = dir.path().join("cubic.json");
    l1h(&["approximate", "--spec", &spec("cubic_step.json"), "--out", saved.to_str().unwrap()]);
    let out = l1h(&[
        "verify",
        "--spec",
        &spec("hermite_splines.json"),
        "--approximant",
        saved.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn cubic_csv_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("cubic.csv");
    let out = l1h(&["approximate", "--spec", &spec("cubic_step.json"), "--csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    // independent interpolation of H at cos(i pi / 6)
    let s = 3f64.sqrt();
    let (p, q) = (s / 2.0, 0.5f64);
    // g = 1/2 + c1 x + c3 x^3 with g(p) = g(q) = 1
    let det = p * q.powi(3) - q * p.powi(3);
    let c1 = (0.5 * q.powi(3) - 0.5 * p.powi(3)) / det;
    let c3 = (p * 0.5 - q * 0.5) / det;
    assert!((c1 - 1.211325).abs() < 1e-6 && (c3 + 0.845299).abs() < 1e-6);
    let rows = csv_rows(&csv);
    assert!(rows.len() >= 401);
    for r in &rows {
        let g = 0.5 + c1 * r[0] + c3 * r[0].powi(3);
        assert!((r[2] - g).abs() < 1e-12, "x = {}", r[0]);
        let f = if r[0] >= 0.0 { 1.0 } else { 0.0 };
        assert_eq!(r[1], f);
        assert_eq!(r[3], r[1] - r[2]);
    }
    for w in rows.windows(2) {
        assert!(w[0][0] < w[1][0]);
    }
    for x in [-p, -q, 0.0, q, p, -1.0, 1.0] {
        assert!(rows.iter().any(|r| (r[0] - x).abs() < 1e-15), "missing {x}");
    }
}

#[test]
fn spline_csv_shows_gibbs_oscillation() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("splines.csv");
    let out = l1h(&["approximate", "--spec", &spec("hermite_splines.json"), "--csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&csv);
    for knot in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        assert!(rows.iter().any(|r| r[0] == knot));
    }
    // the approximant leaves [0, 1] near the jump
    let near: Vec<&Vec<f64>> = rows.iter().filter(|r| r[0].abs() < 0.5).collect();
    assert!(near.iter().any(|r| r[2] < 0.0) || near.iter().any(|r| r[2] > 1.0));
    let mut changes = 0;
    for w in rows.windows(2) {
        if w[0][3] * w[1][3] < 0.0 {
            changes += 1;
        }
    }
    assert!(changes >= 3, "{changes}");
}

#[test]
fn perturbed_coefficients_fail_verification() {
    let out = l1h(&["verify", "--spec", &spec("cubic_step.json"), "--perturb", "0.1"]);
    assert_eq!(out.status.code(), Some(4));
    let v = json(&out);
    assert!(v["oracle_gap"].as_f64().unwrap() > 5e-3);

    let out = l1h(&["verify", "--spec", &spec("cubic_step.json")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["characterization"]["certified"], Value::Bool(true));
}

#[test]
fn solver_failure_exits_with_error_json() {
    let dir = tempfile::tempdir().unwrap();
    let off = job(
        dir.path(),
        "off.json",
        r#"{"function":{"domain":[-1,1],"jump":0.4,"left":0,"right":1},
            "space":{"type":"polynomial","degree":3},"actions":["canonical"]}"#,
    );
    let out = l1h(&["canonical", "--spec", &off]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["error"]["code"], "non_square_system");
    assert!(v["error"]["message"].as_str().is_some());
}

#[test]
fn pipeline_error_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let odd = job(
        dir.path(),
        "odd.json",
        r#"{"function":{"domain":[-1,1],"jump":0,"left":0,"right":1},
            "space":{"type":"polynomial","degree":2},"actions":["approximate"]}"#,
    );
    let out = l1h(&["approximate", "--spec", &odd]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out)["error"]["code"], "odd_dimension");
}

#[test]
fn oscillating_target_is_flagged() {
    let out = l1h(&["approximate", "--spec", &spec("oscillating.json")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let flags: Vec<&str> = v["flags"].as_array().unwrap().iter().map(|f| f.as_str().unwrap()).collect();
    assert!(flags.contains(&"sign_pattern_violation"), "{flags:?}");
    assert!(v["sign_changes"].as_array().unwrap().len() > 10);
}

#[test]
fn run_executes_actions_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let body = fs::read_to_string(jobs().join("cubic_step.json")).unwrap();
    let path = job(dir.path(), "cubic.json", &body);
    let out = l1h(&["run", "--spec", &path]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    for key in ["canonical", "approximate", "verify", "sample"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    // relative output paths resolve against the job file
    assert!(dir.path().join("cubic_step.csv").exists());
}

#[test]
fn bad_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let empty = job(
        dir.path(),
        "empty.json",
        r#"{"function":{"domain":[-1,1],"jump":0,"left":0,"right":1},
            "space":{"type":"polynomial","degree":3},"actions":[]}"#,
    );
    assert_eq!(l1h(&["run", "--spec", &empty]).status.code(), Some(1));
    let coarse = job(
        dir.path(),
        "coarse.json",
        r#"{"function":{"domain":[-1,1],"jump":0,"left":0,"right":1},
            "space":{"type":"polynomial","degree":3},"actions":["sample"],"sample_resolution":1}"#,
    );
    assert_eq!(l1h(&["run", "--spec", &coarse]).status.code(), Some(1));
    let no_csv = job(
        dir.path(),
        "nocsv.json",
        r#"{"function":{"domain":[-1,1],"jump":0,"left":0,"right":1},
            "space":{"type":"polynomial","degree":3},"actions":["sample"]}"#,
    );
    assert_eq!(l1h(&["run", "--spec", &no_csv]).status.code(), Some(1));
    assert_eq!(l1h(&["canonical"]).status.code(), Some(1));
    assert_eq!(l1h(&["--help"]).status.code(), Some(0));
}
