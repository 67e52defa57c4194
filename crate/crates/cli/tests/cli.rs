use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn anatomik(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anatomik"))
        .args(args)
        .current_dir(dir)
        .env_remove("ANATOMIK_SKELETON")
        .output()
        .expect("run anatomik")
}

fn ok(dir: &Path, args: &[&str]) -> Value {
    let out = anatomik(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: Value = serde_json::from_slice(&out.stdout).expect("one JSON object on stdout");
    assert_eq!(summary["status"], "ok");
    summary
}

#[test]
fn metrics_of_identical_files_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["--seed", "1", "--out", "a.jsonl", "synth", "--frames", "40"]);
    std::fs::copy(d.join("a.jsonl"), d.join("b.jsonl")).unwrap();
    let s = ok(d, &["metrics", "--pred", "a.jsonl", "--gt", "b.jsonl"]);
    assert_eq!(s["report"]["mpjpe_mm"], 0.0);
    assert_eq!(s["report"]["pck"], 1.0);
}

#[test]
fn default_surface_has_resolution_squared_rows() {
    let dir = tempfile::tempdir().unwrap();
    let s = ok(dir.path(), &["--out", "surface.csv", "surface"]);
    assert_eq!(s["rows"], 4096);
    let text = std::fs::read_to_string(dir.path().join("surface.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,z,loc2d,sym,angle,total_weak,full3d"));
    assert_eq!(lines.count(), 64 * 64);
}

#[test]
fn bad_arguments_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(anatomik(dir.path(), &["synth", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(anatomik(dir.path(), &["no-such-command"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_are_reported_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = anatomik(dir.path(), &["--out", "x.jsonl", "fit", "--input", "missing.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["status"], "error");
    assert_eq!(summary["command"], "fit");
}

#[test]
fn skeleton_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let run = |skeleton: &Path| {
        Command::new(env!("CARGO_BIN_EXE_anatomik"))
            .args(["--out", "s.jsonl", "synth", "--frames", "5"])
            .current_dir(d)
            .env("ANATOMIK_SKELETON", skeleton)
            .output()
            .unwrap()
    };
    std::fs::write(d.join("broken.json"), "{}").unwrap();
    let out = run(&d.join("broken.json"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("broken.json"));

    let shipped = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/standard_skeleton.json");
    assert!(run(&shipped).status.success());
}

#[test]
fn flags_override_config_which_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("cfg.json"), r#"{"frames": 7, "fps": 30.0, "seed": 4}"#).unwrap();
    let from_config = ok(d, &["--config", "cfg.json", "--out", "a.jsonl", "synth"]);
    assert_eq!(from_config["frames"], 7);
    assert_eq!(from_config["fps"], 30.0);
    let from_flag = ok(d, &["--config", "cfg.json", "--out", "b.jsonl", "synth", "--frames", "9"]);
    assert_eq!(from_flag["frames"], 9);
    let defaults = ok(d, &["--out", "c.jsonl", "synth"]);
    assert_eq!(defaults["frames"], 1000);
}

#[test]
fn commands_leave_their_inputs_alone() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["--seed", "2", "--out", "clean.jsonl", "synth", "--frames", "30"]);
    ok(d, &["--seed", "3", "--out", "noisy.jsonl", "corrupt", "--input", "clean.jsonl"]);
    let snapshot = |name: &str| std::fs::read(d.join(name)).unwrap();
    let (clean, noisy) = (snapshot("clean.jsonl"), snapshot("noisy.jsonl"));
    ok(d, &["--out", "fit.jsonl", "fit", "--input", "noisy.jsonl"]);
    ok(d, &["--out", "lift.jsonl", "lift", "--input", "noisy.jsonl", "--max-iters", "20"]);
    ok(d, &["--out", "net.json", "tpnet-train", "--input", "noisy.jsonl", "--hidden", "8", "--window", "2", "--epochs", "1"]);
    let net = snapshot("net.json");
    ok(d, &["--out", "r.jsonl", "tpnet-refine", "--params", "net.json", "--input", "noisy.jsonl"]);
    ok(d, &["--out", "sens.csv", "sensitivity", "--params", "net.json", "--input", "noisy.jsonl", "--trials", "2"]);
    ok(d, &["metrics", "--pred", "noisy.jsonl", "--gt", "clean.jsonl"]);
    assert_eq!(snapshot("clean.jsonl"), clean);
    assert_eq!(snapshot("noisy.jsonl"), noisy);
    assert_eq!(snapshot("net.json"), net);
}

#[test]
fn pipeline_refinement_beats_corrupted_input() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["--seed", "1", "--out", "clean.jsonl", "synth", "--frames", "2000"]);
    ok(d, &["--seed", "2", "--out", "noisy.jsonl", "corrupt", "--input", "clean.jsonl"]);
    ok(
        d,
        &[
            "--seed", "3", "--out", "net.json", "tpnet-train", "--input", "noisy.jsonl", "--hidden", "256",
            "--window", "10", "--lr", "1e-3", "--epochs", "20", "--augment-heading", "1",
        ],
    );
    let refine = ok(d, &["--out", "refined.jsonl", "tpnet-refine", "--params", "net.json", "--input", "noisy.jsonl"]);
    let corrupted = ok(d, &["metrics", "--pred", "noisy.jsonl", "--gt", "clean.jsonl"]);
    let refined = ok(d, &["metrics", "--pred", "refined.jsonl", "--gt", "clean.jsonl"]);
    let (before, after) = (
        corrupted["report"]["mpjpe_mm"].as_f64().unwrap(),
        refined["report"]["mpjpe_mm"].as_f64().unwrap(),
    );
    assert!(after < before, "refined {after} vs corrupted {before}");
    assert_eq!(refine["refined_mpjpe_mm"].as_f64().unwrap(), after);
}
