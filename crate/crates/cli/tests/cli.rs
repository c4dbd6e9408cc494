use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn corpus() -> PathBuf {
    root().join("data/mini_corpus.jsonl")
}

fn golden(name: &str) -> Vec<u8> {
    std::fs::read(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

fn bugtriage(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bugtriage"))
        .args(args)
        .env_remove("BUGTRIAGE_BOUNDARY")
        .env_remove("BUGTRIAGE_DATA")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const GOLDEN_FILES: [&str; 3] = ["dabt_assignments.jsonl", "dabt_daily.csv", "dabt_metrics.json"];

#[test]
fn solve_one_bug_instance() {
    let path = root().join("data/one_bug_instance.json");
    let o = bugtriage(&["solve", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("bug 1 -> developer 1"), "{out}");
    assert!(out.contains("objective 1.0"), "{out}");
}

#[test]
fn solve_rabt_variant() {
    let path = root().join("data/one_bug_instance.json");
    let o = bugtriage(&["solve", path.to_str().unwrap(), "--variant", "rabt"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("objective 1.0"));
}

#[test]
fn validate_reports_the_bad_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.jsonl");
    let good = std::fs::read_to_string(corpus()).unwrap();
    let mut lines: Vec<&str> = good.lines().take(3).collect();
    lines.push("{\"bug_id\": 9, \"summary\": 3}");
    std::fs::write(&path, lines.join("\n")).unwrap();
    let o = bugtriage(&["validate", path.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("events.jsonl:4:"), "{}", stderr(&o));
}

#[test]
fn validate_accepts_the_mini_corpus() {
    let o = bugtriage(&["validate", corpus().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("535 records"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(bugtriage(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(bugtriage(&["simulate", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(bugtriage(&["simulate", "--policy", "random"]).status.code(), Some(2));
    assert_eq!(bugtriage(&[]).status.code(), Some(2));
}

#[test]
fn missing_boundary_is_a_runtime_error() {
    let o = bugtriage(&["prepare", "--data", corpus().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--boundary"));
}

#[test]
fn bad_alpha_is_rejected() {
    let o = bugtriage(&["prepare", "--data", corpus().to_str().unwrap(), "--boundary", "364", "--alpha", "1.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("alpha"));
}

#[test]
fn config_file_rejects_unknown_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, r#"{"boundary_day": 364, "gamma": 2}"#).unwrap();
    let o = bugtriage(&["prepare", "--data", corpus().to_str().unwrap(), "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("gamma"), "{}", stderr(&o));
}

#[test]
fn prepare_writes_summary_from_env() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_bugtriage"))
        .args(["prepare", "--out", dir.path().to_str().unwrap()])
        .env("BUGTRIAGE_DATA", corpus())
        .env("BUGTRIAGE_BOUNDARY", "364")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let log = std::fs::read_to_string(dir.path().join("cleaning_log.csv")).unwrap();
    assert!(log.starts_with("step,kept_count\ntotal,535\n"), "{log}");
    assert!(dir.path().join("cleaned.jsonl").exists());
    assert!(dir.path().join("dataset_summary.json").exists());
}

#[test]
fn generate_then_validate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("synthetic.jsonl");
    let o = bugtriage(&["generate", "--bugs", "40", "--seed", "3", "--out", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = bugtriage(&["validate", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn simulate_dabt_matches_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = bugtriage(&[
        "simulate",
        "--data",
        corpus().to_str().unwrap(),
        "--boundary",
        "364",
        "--policy",
        "dabt",
        "--alpha",
        "0.5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in GOLDEN_FILES {
        let got = std::fs::read(dir.path().join(name)).unwrap();
        assert!(got == golden(name), "{name} differs from the golden copy");
    }
}

#[test]
fn trained_artifacts_reproduce_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let models = dir.path().join("models");
    let data = corpus();
    let o = bugtriage(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--boundary",
        "364",
        "--out",
        models.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for file in ["vocabulary.json", "classifier.json", "topic_model.json", "topic_selection.json", "cost_matrix.json"] {
        assert!(models.join(file).exists(), "{file}");
    }
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = bugtriage(&[
            "simulate",
            "--data",
            data.to_str().unwrap(),
            "--boundary",
            "364",
            "--models",
            models.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        for name in GOLDEN_FILES {
            assert!(std::fs::read(out.join(name)).unwrap() == golden(name), "run {run}: {name}");
        }
    }
}

#[test]
fn models_from_another_corpus_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("small.jsonl");
    assert!(bugtriage(&["generate", "--bugs", "150", "--out", data.to_str().unwrap()]).status.success());
    let models = dir.path().join("models");
    let o = bugtriage(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--boundary",
        "364",
        "--topics",
        "2,3",
        "--out",
        models.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = bugtriage(&[
        "simulate",
        "--data",
        corpus().to_str().unwrap(),
        "--boundary",
        "364",
        "--models",
        models.to_str().unwrap(),
        "--out",
        dir.path().join("run").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("different developer set"), "{}", stderr(&o));
}
