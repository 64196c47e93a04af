//! End-to-end runs of the `wow` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn wow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wow"))
        .args(args)
        .env_remove("WOW_SEED")
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

fn file(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn line_measure(points: &[f64], weights: &[f64]) -> String {
    serde_json::json!({ "points": points.iter().map(|x| [x]).collect::<Vec<_>>(), "weights": weights }).to_string()
}

fn dirac_law(points: &[f64]) -> String {
    let atoms: Vec<Value> = points
        .iter()
        .map(|x| serde_json::json!({ "points": [[x]], "weights": [1.0] }))
        .collect();
    let w = 1.0 / points.len() as f64;
    serde_json::json!({ "atoms": atoms, "weights": vec![w; points.len()] }).to_string()
}

fn num(v: &Value, key: &str) -> f64 {
    v[key]
        .as_f64()
        .unwrap_or_else(|| panic!("missing {key} in {v}"))
}

#[test]
fn ot_on_diracs_and_two_atoms() {
    let dir = TempDir::new().unwrap();
    let d0 = file(&dir, "d0.json", &line_measure(&[0.0], &[1.0]));
    let d3 = file(&dir, "d3.json", &line_measure(&[3.0], &[1.0]));
    let out = wow(&["ot", s(&d0), s(&d3)]);
    assert!(out.status.success());
    assert_eq!(num(&json(&out), "cost_w2sq"), 9.0);

    let a = file(&dir, "a.json", &line_measure(&[0.0, 1.0], &[0.5, 0.5]));
    let b = file(&dir, "b.json", &line_measure(&[2.0, 5.0], &[0.5, 0.5]));
    let v = json(&wow(&["ot", s(&a), s(&b)]));
    assert!((num(&v, "cost_w2sq") - 10.0).abs() < 1e-12);
    assert!(num(&v, "decomposition_residual") < 1e-9);

    let same = json(&wow(&["ot", s(&a), s(&a)]));
    assert_eq!(num(&same, "cost_w2sq"), 0.0);
    assert!(num(&same, "decomposition_residual") < 1e-9);
}

#[test]
fn ot_exports_the_plan_as_csv() {
    let dir = TempDir::new().unwrap();
    let a = file(&dir, "a.json", &line_measure(&[0.0, 1.0], &[0.5, 0.5]));
    let b = file(&dir, "b.json", &line_measure(&[2.0, 5.0], &[0.5, 0.5]));
    let csv = dir.path().join("plan.csv");
    assert!(wow(&["ot", s(&a), s(&b), "--csv", s(&csv)])
        .status
        .success());
    let mut reader = csv::Reader::from_path(&csv).unwrap();
    assert_eq!(reader.records().count(), 2);
}

#[test]
fn nested_two_by_two_example() {
    let dir = TempDir::new().unwrap();
    let m = file(&dir, "m.json", &dirac_law(&[0.0, 4.0]));
    let n = file(&dir, "n.json", &dirac_law(&[1.0, 3.0]));
    let out = wow(&[
        "nested",
        s(&m),
        s(&n),
        "--geodesic-ts",
        "0,0.5,1",
        "--extract-monge",
    ]);
    assert!(out.status.success());
    let v = json(&out);
    assert!((num(&v, "w2sq") - 1.0).abs() < 1e-12);
    assert!((num(&v, "pairing") - 6.0).abs() < 1e-12);
    let residuals = v["geodesic"]["residuals"].as_array().unwrap();
    assert!(residuals.iter().all(|r| num(r, "residual") < 1e-7));
    assert_eq!(num(&v["monge"], "cost"), 1.0);
}

#[test]
fn nested_dirac_laws_match_ot() {
    let dir = TempDir::new().unwrap();
    let a = line_measure(&[0.0, 1.0], &[0.5, 0.5]);
    let b = line_measure(&[2.0, 5.0], &[0.5, 0.5]);
    let mu = file(&dir, "mu.json", &a);
    let nu = file(&dir, "nu.json", &b);
    let m = file(
        &dir,
        "m.json",
        &format!(r#"{{"atoms":[{a}],"weights":[1.0]}}"#),
    );
    let n = file(
        &dir,
        "n.json",
        &format!(r#"{{"atoms":[{b}],"weights":[1.0]}}"#),
    );
    let ot = json(&wow(&["ot", s(&mu), s(&nu)]));
    let nested = json(&wow(&["nested", s(&m), s(&n)]));
    assert_eq!(num(&ot, "cost_w2sq"), num(&nested, "w2sq"));
    assert_eq!(num(&ot, "cost_mc"), num(&nested, "pairing"));
}

#[test]
fn lggrm_is_reproducible_and_reports_criteria() {
    let dir = TempDir::new().unwrap();
    let bm = file(
        &dir,
        "bm.json",
        r#"{"basis":{"type":"brownian_motion"},"dim":1,"label_grid":128}"#,
    );
    let (o1, o2) = (dir.path().join("1.json"), dir.path().join("2.json"));
    for o in [&o1, &o2] {
        assert!(wow(&[
            "--seed",
            "5",
            "--out",
            s(o),
            "lggrm",
            s(&bm),
            "--samples",
            "4"
        ])
        .status
        .success());
    }
    assert_eq!(std::fs::read(&o1).unwrap(), std::fs::read(&o2).unwrap());

    let walsh = file(
        &dir,
        "walsh.json",
        r#"{"basis":{"type":"walsh","levels":4,"scales":[1.0,0.5,0.25,0.125,0.0625]},"dim":1,"label_grid":16}"#,
    );
    let v = json(&wow(&["lggrm", s(&walsh), "--samples", "2"]));
    assert_eq!(v["walsh"]["verdict"], "converges");

    let fbm = file(
        &dir,
        "fbm.json",
        r#"{"basis":{"type":"fractional_bm","hurst":0.6},"dim":2,"label_grid":32}"#,
    );
    let v = json(&wow(&[
        "lggrm",
        s(&fbm),
        "--samples",
        "2",
        "--berman-samples",
        "50",
    ]));
    assert!((num(&v["hurst"], "hd") - 1.2).abs() < 1e-12);
    assert_eq!(v["hurst"]["satisfied"], false);
}

#[test]
fn seed_comes_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let bm = file(
        &dir,
        "bm.json",
        r#"{"basis":{"type":"brownian_motion"},"dim":1,"label_grid":64}"#,
    );
    let flag = wow(&["--seed", "9", "lggrm", s(&bm), "--samples", "2"]);
    let env = Command::new(env!("CARGO_BIN_EXE_wow"))
        .args(["lggrm", s(&bm), "--samples", "2"])
        .env("WOW_SEED", "9")
        .output()
        .unwrap();
    assert_eq!(flag.stdout, env.stdout);
}

#[test]
fn verify_suites_pass() {
    let v = json(&wow(&[
        "verify",
        "--suite",
        "decomposition",
        "--cases",
        "200",
    ]));
    assert_eq!(v["passed"], true);
    let out = wow(&["verify", "--suite", "monotonicity", "--cases", "50"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["passed"], true);
    let out = wow(&["verify", "--suite", "nested", "--cases", "0"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["passed"], true);
}

#[test]
fn input_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        wow(&["verify", "--suite", "nonsense"]).status.code(),
        Some(2)
    );
    assert_eq!(
        wow(&["ot", "missing.json", "missing.json"]).status.code(),
        Some(2)
    );
    let bad = file(&dir, "bad.json", r#"{"points":[[0.0]],"weights":[0.5]}"#);
    assert_eq!(wow(&["ot", s(&bad), s(&bad)]).status.code(), Some(2));
    let a = file(&dir, "a.json", &line_measure(&[0.0], &[1.0]));
    let b = file(&dir, "b.json", r#"{"points":[[0.0, 1.0]],"weights":[1.0]}"#);
    assert_eq!(wow(&["ot", s(&a), s(&b)]).status.code(), Some(2));
    assert_eq!(
        wow(&["--threads", "0", "ot", s(&a), s(&a)]).status.code(),
        Some(2)
    );
}
