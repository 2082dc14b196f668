use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn geoprox(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geoprox"))
        .args(args)
        .output()
        .expect("spawn geoprox")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

#[test]
fn run_preset_csv_tail_matches_cos_squared() {
    let out = geoprox(&["run", "--preset", "two_halfspaces(pi/4)"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "k,x0,x1,x2,residual,dist_to_fix,ratio");
    let ratios: Vec<f64> = lines
        .filter_map(|l| l.rsplit(',').next().and_then(|r| r.parse().ok()))
        .collect();
    assert!(ratios.len() > 10);
    for r in &ratios[ratios.len() / 2..] {
        assert!((r - 0.5).abs() <= 0.01, "ratio {r}");
    }
}

#[test]
fn run_writes_trace_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = geoprox(&[
        "run",
        "--preset",
        "alg2_projected_gradient",
        "--seed",
        "5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema"], "geoprox-report/1");
    assert_eq!(report["seed"], 5);
    assert_eq!(report["pass"], true);
    let csv = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(csv.lines().count(), report["iterations"].as_u64().unwrap() as usize + 2);
}

#[test]
fn run_is_reproducible() {
    let a = geoprox(&["run", "--preset", "sphere_fermat_weber", "--format", "json", "--seed", "3"]);
    let b = geoprox(&["run", "--preset", "sphere_fermat_weber", "--format", "json", "--seed", "3"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn shipped_configs_run_and_pass() {
    for name in ["configs/two_balls.json", "configs/cap_prox_km.json"] {
        let path = repo_file(name);
        let out = geoprox(&["run", "--config", path.to_str().unwrap(), "--format", "json"]);
        assert_eq!(out.status.code(), Some(0), "{name}");
        assert_eq!(json(&out)["pass"], true, "{name}");
    }
}

#[test]
fn config_errors_exit_two_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{
  "schema": "geoprox-config/1",
  "space": {"kind": "euclidean", "dim": 2},
  "operator": {"type": "project", "set": {"type": "ball", "center": [0, 0], "radius": 1, "colour": 3}},
  "initial_point": [1, 1]
}"#,
    )
    .unwrap();
    let out = geoprox(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("operator"), "{err}");
    assert!(err.contains("line 4"), "{err}");

    std::fs::write(
        &path,
        r#"{"schema": "geoprox-config/1", "space": {"kind": "euclidean", "dim": 2},
            "operator": {"type": "project", "set": "missing"}, "initial_point": [1, 1]}"#,
    )
    .unwrap();
    let out = geoprox(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("operator.set"));

    assert_eq!(geoprox(&["run", "--preset", "no_such_preset"]).status.code(), Some(2));
    assert_eq!(geoprox(&["run", "--config", "/nonexistent.json"]).status.code(), Some(2));
    assert_eq!(geoprox(&["rate", "--alpha", "1.5", "--mu", "2"]).status.code(), Some(2));
}

#[test]
fn certify_values() {
    let out = geoprox(&["certify", "prox", "--c", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["alpha"], 0.5);
    assert_eq!(v["epsilon"], 0.0);

    let v = json(&geoprox(&["certify", "prox", "--delta", "0.39269908169872414"]));
    let c = v["c"].as_f64().unwrap();
    assert!((c - std::f64::consts::FRAC_PI_2).abs() < 1e-12);

    let v = json(&geoprox(&["certify", "cyclic", "--n", "3"]));
    assert!((v["folded"]["alpha"].as_f64().unwrap() - 0.75).abs() < 1e-12);

    let v = json(&geoprox(&[
        "certify", "compose", "--alpha0", "0.3333333333333333", "--epsilon0", "0", "--alpha1", "0.5",
        "--epsilon1", "0",
    ]));
    assert!((v["alpha"].as_f64().unwrap() - 0.6).abs() < 1e-12);

    let v = json(&geoprox(&["certify", "asymptotic", "--of", "km", "--beta", "0.5", "--delta", "0.1"]));
    assert!((v["limit"]["alpha"].as_f64().unwrap() - 0.25).abs() < 1e-12);

    let v = json(&geoprox(&["certify", "operator", "--preset", "two_halfspaces(pi/4)"]));
    assert!((v["alpha"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn rate_prediction() {
    let v = json(&geoprox(&["rate", "--alpha", "0.5", "--epsilon", "0", "--mu", "2"]));
    assert!((v["gamma"].as_f64().unwrap() - 0.75f64.sqrt()).abs() < 1e-12);
    assert_eq!(v["validity"], "valid");
}

#[test]
fn barycenter_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pts.json");
    std::fs::write(
        &path,
        r#"{"space": {"kind": "euclidean", "dim": 1}, "points": [[0], [1]], "weights": [0.9, 0.1], "p": 3}"#,
    )
    .unwrap();
    let out = geoprox(&["barycenter", "--input", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let z: Vec<f64> = serde_json::from_slice(&out.stdout).unwrap();
    assert!((z[0] - 0.25).abs() < 1e-9);
}

#[test]
fn estimate_reports_modulus() {
    let out = geoprox(&["estimate", "--preset", "two_halfspaces(pi/2)", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let mu = v["subregularity"]["mu"].as_f64().unwrap();
    assert!((mu - 1.0).abs() < 1e-9, "{mu}");
    assert_eq!(v["firmness"]["epsilons"][0], 0.0);
}

#[test]
fn verify_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = geoprox(&["verify", "--seed", "1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(v["checks"].as_array().unwrap().len(), 9);
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().filter(|l| l.starts_with("PASS")).count(), 9);
}

#[test]
fn shipped_schema_covers_config_fields() {
    let schema: Value =
        serde_json::from_str(&std::fs::read_to_string(repo_file("schema/geoprox-config-1.schema.json")).unwrap())
            .unwrap();
    assert_eq!(schema["properties"]["schema"]["const"], geoprox::harness::config::SCHEMA_VERSION);
    let props = schema["properties"].as_object().unwrap();
    for name in ["two_halfspaces(pi/4)", "alg1_prox_chain", "sphere_fermat_weber"] {
        let cfg: Value = serde_json::from_str(&geoprox::harness::presets::preset(name).unwrap().to_json()).unwrap();
        for key in cfg.as_object().unwrap().keys() {
            assert!(props.contains_key(key), "{key}");
        }
    }
}

#[test]
fn help_and_version() {
    let out = geoprox(&["--version"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("geoprox "));
    assert_eq!(geoprox(&["help"]).status.code(), Some(0));
}
