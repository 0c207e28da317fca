use std::path::Path;
use std::process::{Command, Output};

fn tlink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tlink"))
        .args(args)
        .env_remove("TLINK_CORPUS_ROOT")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn synth(dir: &Path, docs: &str, seed: &str) {
    let out = tlink(&["synth", "--docs", docs, "--links-per-doc", "6", "--seed", seed, "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bound_prints_implied_accuracy() {
    let out = tlink(&["bound", "--p", "0.6146", "--pn", "0.6032", "--s", "0.05117"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "a = 0.8260\n");

    let out = tlink(&["--format", "json", "bound", "--p", "0.6146", "--pn", "0.6032", "--s", "0.05117"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["a"].as_f64().unwrap() - 0.8263).abs() < 5e-4);
}

#[test]
fn input_errors_exit_one() {
    assert_eq!(tlink(&["bound", "--p", "0.5", "--pn", "0.5", "--s", "0"]).status.code(), Some(1));
    assert_eq!(tlink(&["bound", "--p", "1.5", "--pn", "0.5", "--s", "0.1"]).status.code(), Some(1));
    assert_eq!(tlink(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(tlink(&["validate"]).status.code(), Some(1));
    assert_eq!(tlink(&["validate", "/nonexistent/corpus"]).status.code(), Some(1));
    assert_eq!(tlink(&["run", "xv", "--features", "everything", "x"]).status.code(), Some(1));
    let out = tlink(&["synth", "--signal-fraction", "2", "--out", "/tmp/unused"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn help_exits_zero() {
    let out = tlink(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("bound"));
}

#[test]
fn validate_reports_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "3", "1");
    let out = tlink(&["validate", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("3 documents, 21 TLINKs, 0 files with errors"));

    std::fs::write(dir.path().join("broken.tml"), r#"<EVENT id="e1">x</EVENT><TLINK eventID="e9" relatedToEvent="e1" relType="BEFORE"/>"#).unwrap();
    let out = tlink(&["--format", "json", "validate", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["documents"], 3);
    assert_eq!(v["issues"].as_array().unwrap().len(), 1);
}

#[test]
fn stats_links_groups_per_path() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    synth(a.path(), "2", "1");
    synth(b.path(), "3", "2");
    let out = tlink(&["--format", "tsv", "stats", "links", a.path().to_str().unwrap(), b.path().to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[2][0], "combined");
    assert_eq!(rows[2][1], "35");
    assert_eq!(rows[2][5], "30");
}

#[test]
fn stats_signals_lists_lexicon_phrases() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "10", "4");
    let out = tlink(&["--format", "tsv", "stats", "signals", "--min-freq", "1", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("phrase\tcorpus_freq\tsignal_freq\tlikelihood_pct\n"));
    assert!(text.lines().skip(1).all(|l| l.split('\t').count() == 4));
}

#[test]
fn corpus_root_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "2", "1");
    let out = Command::new(env!("CARGO_BIN_EXE_tlink"))
        .args(["validate"])
        .env("TLINK_CORPUS_ROOT", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn same_seed_same_json() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "20", "9");
    let path = dir.path().to_str().unwrap();
    let args = ["--format", "json", "run", "xv", "--folds", "10", "--features", "base", "--seed", "5", path];
    let first = tlink(&args);
    let second = tlink(&args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(first.stdout, second.stdout);
    let v: serde_json::Value = serde_json::from_slice(&first.stdout).unwrap();
    let r = &v[0];
    for key in ["feature_set", "mode", "seed", "n_train", "n_eval", "baseline", "accuracy", "confusion"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    assert_eq!(r["n_eval"], 120);
    assert_eq!(r["mode"], "xv");
}

#[test]
fn split_and_subset_tables() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "30", "3");
    let path = dir.path().to_str().unwrap();
    let out = tlink(&["run", "split", "--max-iters", "50", path]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("Baseline (most common class)"));
    assert!(text.contains("base+signal"));

    let report = dir.path().join("subset.tsv");
    let out = tlink(&[
        "--format", "tsv", "--output", report.to_str().unwrap(),
        "run", "subset", "--which", "signalled", "--folds", "5", "--max-iters", "50", path,
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let tsv = std::fs::read_to_string(report).unwrap();
    let rows: Vec<&str> = tsv.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1..].iter().all(|r| r.split('\t').nth(3) == Some("signalled")));

    assert_eq!(tlink(&["run", "subset", "--which", "all", path]).status.code(), Some(1));
    assert_eq!(tlink(&["run", "xv", "--folds", "1000", path]).status.code(), Some(1));
}
