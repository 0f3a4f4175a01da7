use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use relaxhmc_core::oracles::truncated_normal_moments;
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_relaxhmc"));
    c.env_remove("RELAXHMC_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn keys(v: &Value) -> BTreeSet<String> {
    v.as_object().unwrap().keys().cloned().collect()
}

#[test]
fn list_prints_catalog() {
    let o = run(&["list"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for name in [
        "gaussian-inequality",
        "circle-benchmark",
        "sphere-gaussian",
        "sphere-t",
        "torus",
        "simplex",
        "factor-network",
        "rate-zero-measure",
        "rate-positive-measure",
    ] {
        assert!(text.contains(name), "{name} missing");
    }
}

#[test]
fn unknown_experiment_exits_2() {
    let o = run(&["run", "moebius-strip"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown experiment"));
}

#[test]
fn validate_accepts_and_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    fs::write(&good, r#"{"experiment": "torus", "lambda_grid": [1e-1, 1e-2], "replicates": 2}"#).unwrap();
    let o = run(&["validate", good.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let echo: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(echo["experiment"], "torus");
    assert_eq!(echo["replicates"], 2);

    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\n  \"experiment\": \"torus\",\n  \"lambda_grid\": [1e-4, 1e-3]\n}\n").unwrap();
    let o = run(&["validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("lambda_grid must be strictly decreasing"), "{err}");
    assert!(err.contains("line 3"), "{err}");

    let zero = dir.path().join("zero.json");
    fs::write(&zero, r#"{"experiment": "torus", "replicates": 0}"#).unwrap();
    let o = run(&["validate", zero.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("replicates must be >= 1"));

    let typo = dir.path().join("typo.json");
    fs::write(&typo, "{\n  \"experiment\": \"torus\",\n  \"lambda\": [1e-2]\n}").unwrap();
    let o = run(&["validate", typo.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let unknown = dir.path().join("unknown.json");
    fs::write(&unknown, r#"{"experiment": "klein-bottle"}"#).unwrap();
    assert_eq!(run(&["validate", unknown.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn outputs_replay_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let o = run(&["run", "gaussian-inequality", "--iterations", "600", "--seed", "11", "--out", a.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let resolved: Value = serde_json::from_str(&fs::read_to_string(a.join("config_resolved.json")).unwrap()).unwrap();
    assert_eq!(resolved["seed"], 11);
    assert_eq!(resolved["hmc"]["n_iterations"], 600);

    let b = dir.path().join("b");
    let o = run(&["run", "gaussian-inequality", "--config", a.join("config_resolved.json").to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(a.join("samples.csv")).unwrap(), fs::read(b.join("samples.csv")).unwrap());

    let csv = fs::read_to_string(a.join("samples.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "lambda,replicate,iteration,theta_1,distance,accepted");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 6);
    assert_eq!(row[2], "300");
    // 17 significant digits: one leading digit and 16 decimals
    let mantissa = row[3].split('e').next().unwrap().trim_start_matches('-');
    assert_eq!(mantissa.len(), 18, "{}", row[3]);
    assert!(row[5] == "0" || row[5] == "1");
    assert_eq!(csv.lines().count(), 1 + 300);
}

#[test]
fn seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["run", "rate-positive-measure", "--out", dir.path().to_str().unwrap()])
        .env("RELAXHMC_SEED", "1234")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let resolved: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("config_resolved.json")).unwrap()).unwrap();
    assert_eq!(resolved["seed"], 1234);
}

#[test]
fn summary_schema_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let mut shapes = Vec::new();
    for (exp, extra) in [
        ("rate-positive-measure", vec![]),
        ("gaussian-inequality", vec!["--iterations", "400"]),
        ("simplex", vec!["--iterations", "300", "--lambda", "1e-1"]),
    ] {
        let out = dir.path().join(exp);
        let mut args = vec!["run", exp, "--out", out.to_str().unwrap()];
        args.extend(extra);
        let o = run(&args);
        assert!(o.status.success(), "{exp}: {}", stderr(&o));
        let s = summary(&out);
        let run0 = &s["runs"][0];
        shapes.push((keys(&s), keys(run0), keys(&run0["extras"])));
        if exp == "rate-positive-measure" {
            assert!(s["rate_fit"]["slope"].is_f64());
            assert!(run0["acceptance_rate"].is_null());
            assert_eq!(fs::read_to_string(out.join("samples.csv")).unwrap().lines().count(), 1);
        } else {
            assert!(s["rate_fit"].is_null());
            assert!(run0["acceptance_rate"].is_f64());
        }
    }
    assert!(shapes.windows(2).all(|w| w[0] == w[1]), "{shapes:?}");
}

#[test]
fn gaussian_inequality_without_data_is_truncated_prior() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["run", "gaussian-inequality", "--n", "0", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = summary(dir.path());
    let (want, var) = truncated_normal_moments(0.0, 1000.0, 1.0).unwrap();
    assert!((s["sharp_oracle"]["value"].as_f64().unwrap() - want).abs() < 1e-12);
    let est = s["runs"][0]["estimate"]["mean"].as_f64().unwrap();
    let ess = s["runs"][0]["ess"][0].as_f64().unwrap();
    assert!((est - want).abs() < 4.0 * (var / ess).sqrt(), "{est} vs {want} (ESS {ess})");
}
