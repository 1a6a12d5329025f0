use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rfocus_core::harness::default_frequency_scene;

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rfocus-sim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn lists_every_experiment() {
    let out = sim(&["list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["linearity", "two_approx", "opt_speed", "diffraction"] {
        assert!(text.lines().any(|l| l == name), "{name} missing");
    }
}

#[test]
fn experiment_run_writes_layout_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = sim(&["pi-bound", "--out", p(d), "--seed", "9", "--trials", "40"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["manifest.json", "summary.json", "series/pi_bound_ratios.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    assert!(a.join("grids").is_dir());
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["experiment"], "pi_bound");
}

#[test]
fn failing_property_gives_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(
        &spec,
        r#"{"name": "linearity", "seed": 2, "trials": 1,
            "options": {"linearity": {"triples": 10, "reps": 10, "target_total": 0.9}}}"#,
    )
    .unwrap();
    let out = sim(&["linearity", "--spec", p(&spec), "--out", p(&dir.path().join("run"))]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("FAIL total_error_matches_target"));
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("run/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], false);
}

#[test]
fn spec_for_another_experiment_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(&spec, r#"{"name": "quadratic"}"#).unwrap();
    let out = sim(&["linearity", "--spec", p(&spec), "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("quadratic"));
}

#[test]
fn unknown_experiment_is_an_error() {
    let out = sim(&["no-such-thing", "--out", "unused"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_env_then_optimize() {
    let dir = tempfile::tempdir().unwrap();
    let env = dir.path().join("env.json");
    let out = sim(&["gen-env", "--iid", "--n", "24", "--sigma", "0.3", "--seed", "5", "--out", p(&env)]);
    assert!(out.status.success());
    let run = dir.path().join("opt");
    let out = sim(&[
        "optimize", "--env", p(&env), "--noise-db", "0.2", "--budget", "4100", "--out", p(&run),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(run.join("report.json")).unwrap()).unwrap();
    let used = report["total_measurements"].as_u64().unwrap();
    assert!(used <= 4100);
    assert!(report["exact_ratio"].as_f64().unwrap() <= report["halfplane_ratio"].as_f64().unwrap() + 1e-9);
    let trace = fs::read_to_string(run.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count() as u64, used + 1);
}

#[test]
fn gen_env_from_scene_over_frequencies() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.json");
    fs::write(&scene, serde_json::to_string(&default_frequency_scene(2.42e9)).unwrap()).unwrap();
    let out = sim(&["gen-env", "--scene", p(&scene), "--freq", "2.41e9,2.42e9,2.43e9"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let all: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let all = all.as_array().unwrap();
    assert_eq!(all.len(), 3);
    assert_eq!(all[1]["frequency_hz"], 2.42e9);

    let out = sim(&["gen-env", "--scene", p(&scene)]);
    assert!(out.status.success());
    let one: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(one.is_object());
}

#[test]
fn gen_env_needs_a_source() {
    let out = sim(&["gen-env", "--n", "4"]);
    assert!(!out.status.success());
}
