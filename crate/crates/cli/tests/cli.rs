use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn dialex(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dialex"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Value {
    let out = dialex(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap_or(Value::Null)
}

/// ingest -> vocab -> match -> export-tasks in `dir`.
fn build_candidates(dir: &Path) {
    let standard = fixture("standard.tsv");
    let dialect = fixture("dialect.txt");
    ok(
        dir,
        &[
            "ingest",
            "--kind",
            "tagged",
            "--input",
            standard.to_str().unwrap(),
            "--out",
            "tokens.tsv",
        ],
    );
    ok(
        dir,
        &[
            "ingest",
            "--kind",
            "dialect",
            "--input",
            dialect.to_str().unwrap(),
            "--out",
            "sentences.jsonl",
        ],
    );
    ok(
        dir,
        &[
            "vocab",
            "--tokens",
            "tokens.tsv",
            "--sentences",
            "sentences.jsonl",
            "--n",
            "50",
            "--out-standard",
            "standard.vocab.tsv",
            "--out-dialect",
            "dialect.vocab.tsv",
        ],
    );
    ok(
        dir,
        &[
            "--seed",
            "7",
            "match",
            "--standard-vocab",
            "standard.vocab.tsv",
            "--dialect-vocab",
            "dialect.vocab.tsv",
            "--sentences",
            "sentences.jsonl",
            "--k",
            "10",
            "--contexts",
            "3",
            "--window",
            "50",
            "--out",
            "candidates.jsonl",
        ],
    );
    ok(
        dir,
        &[
            "export-tasks",
            "--candidates",
            "candidates.jsonl",
            "--out",
            "tasks.tsv",
        ],
    );
}

#[test]
fn match_emits_k_candidates_per_lemma() {
    let dir = tempfile::tempdir().unwrap();
    build_candidates(dir.path());
    let text = std::fs::read_to_string(dir.path().join("candidates.jsonl")).unwrap();
    let mut per_lemma = std::collections::BTreeMap::<String, usize>::new();
    for line in text.lines() {
        let rec: Value = serde_json::from_str(line).unwrap();
        *per_lemma
            .entry(rec["lemma"].as_str().unwrap().to_string())
            .or_default() += 1;
        assert!(rec["contexts"].as_array().unwrap().len() <= 3);
    }
    assert_eq!(per_lemma.len(), 50);
    assert!(per_lemma.values().all(|&n| n == 10));
}

#[test]
fn end_to_end_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        build_candidates(dir);
        ok(
            dir,
            &[
                "--seed",
                "3",
                "split",
                "--dataset",
                "tasks.tsv",
                "--dev-size",
                "300",
                "--out",
                "split.tsv",
            ],
        );
    }
    for name in ["candidates.jsonl", "tasks.tsv", "split.tsv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
    let manifest = |dir: &Path| -> Value {
        serde_json::from_slice(&std::fs::read(dir.join("candidates.jsonl.manifest.json")).unwrap())
            .unwrap()
    };
    let (ma, mb) = (manifest(a.path()), manifest(b.path()));
    assert_eq!(ma["manifest_hash"], mb["manifest_hash"]);
    assert_eq!(ma["stage"], "match");
    assert_eq!(ma["config"]["seed"], 7);
}

#[test]
fn split_assigns_requested_dev_size() {
    let dir = tempfile::tempdir().unwrap();
    build_candidates(dir.path());
    let summary = ok(
        dir.path(),
        &[
            "split",
            "--dataset",
            "tasks.tsv",
            "--dev-size",
            "300",
            "--out",
            "split.tsv",
        ],
    );
    assert_eq!(summary["dev"], 300);
    assert_eq!(summary["test"], 200);
    let text = std::fs::read_to_string(dir.path().join("split.tsv")).unwrap();
    let dev = text
        .lines()
        .filter(|l| l.split('\t').any(|f| f == "dev"))
        .count();
    assert_eq!(dev, 300);
}

#[test]
fn majority_score_matches_hand_computation() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = fixture("judgment.tsv");
    let report = ok(
        dir.path(),
        &[
            "score",
            "judgment",
            "--dataset",
            dataset.to_str().unwrap(),
            "--system",
            "majority",
        ],
    );
    // Gold is 3 yes / 2 inflected / 7 no; always predicting "no" gives
    // F1(no) = 2*7 / (12 + 7) = 14/19 and zero elsewhere.
    let expected = (14.0 / 19.0) / 3.0;
    assert!((report["overall"].as_f64().unwrap() - expected).abs() < 1e-12);
    assert_eq!(report["items"], 12);
}

#[test]
fn unknown_flags_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        dialex(dir.path(), &["match", "--bogus"]).status.code(),
        Some(2)
    );
    assert_eq!(dialex(dir.path(), &["frobnicate"]).status.code(), Some(2));
    let bad_policy = dialex(
        dir.path(),
        &[
            "score",
            "judgment",
            "--dataset",
            fixture("judgment.tsv").to_str().unwrap(),
            "--system",
            "majority",
            "--if-policy",
            "maybe",
        ],
    );
    assert_eq!(bad_policy.status.code(), Some(2));
}

#[test]
fn missing_stage_input_names_the_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dialex(
        dir.path(),
        &[
            "export-tasks",
            "--candidates",
            "candidates.jsonl",
            "--out",
            "tasks.tsv",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("candidates.jsonl") && err.contains("dialex match"),
        "{err}"
    );
    assert!(!dir.path().join("tasks.tsv").exists());
}

fn labeled_split(dir: &Path) {
    let dataset = fixture("judgment.tsv");
    ok(
        dir,
        &[
            "--seed",
            "1",
            "split",
            "--dataset",
            dataset.to_str().unwrap(),
            "--dev-size",
            "6",
            "--out",
            "labeled.tsv",
        ],
    );
}

#[test]
fn baseline_reports_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        labeled_split(dir);
        let summary = ok(
            dir,
            &[
                "--seed",
                "5",
                "baselines",
                "--dataset",
                "labeled.tsv",
                "--out-dir",
                "base",
            ],
        );
        assert_eq!(summary["train_items"], 6);
        assert_eq!(summary["systems"].as_array().unwrap().len(), 4);
    }
    for system in ["random", "ld-threshold", "majority", "logreg"] {
        for suffix in ["report.json", "predictions.jsonl"] {
            let name = format!("base/{system}.{suffix}");
            assert_eq!(
                std::fs::read(a.path().join(&name)).unwrap(),
                std::fs::read(b.path().join(&name)).unwrap(),
                "{name}"
            );
        }
    }
}

#[test]
fn stored_predictions_score_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    labeled_split(dir.path());
    ok(
        dir.path(),
        &["baselines", "--dataset", "labeled.tsv", "--out-dir", "base"],
    );
    ok(
        dir.path(),
        &[
            "score",
            "judgment",
            "--dataset",
            "labeled.tsv",
            "--split",
            "test",
            "--predictions",
            "base/majority.predictions.jsonl",
            "--out",
            "majority.json",
            "--csv-dir",
            "csv",
        ],
    );
    let rescored: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("majority.json")).unwrap()).unwrap();
    let original: Value = serde_json::from_slice(
        &std::fs::read(dir.path().join("base/majority.report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(rescored["overall"], original["overall"]);
    assert!(dir.path().join("csv/per_pos.csv").exists());
    assert!(dir.path().join("csv/ld_histogram.csv").exists());

    let out = dialex(
        dir.path(),
        &[
            "report",
            "delta",
            "--base",
            "majority.json",
            "--compare",
            "base/logreg.report.json",
            "--csv",
            "delta.csv",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.path().join("delta.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn unreachable_endpoint_leaves_a_partial_run() {
    let dir = tempfile::tempdir().unwrap();
    labeled_split(dir.path());
    // Port 9 on loopback refuses connections on any sane test host.
    std::fs::write(
        dir.path().join("cfg.toml"),
        "[endpoints.dead]\nbase_url = \"http://127.0.0.1:9\"\nmodel_name = \"m\"\nretries = 0\nbackoff_ms = 1\ntimeout_ms = 2000\n",
    )
    .unwrap();
    let out = dialex(
        dir.path(),
        &[
            "--config",
            "cfg.toml",
            "llm-run",
            "judgment",
            "--dataset",
            "labeled.tsv",
            "--endpoint",
            "dead",
            "--template",
            "0",
            "--cache",
            "cache.jsonl",
            "--out",
            "preds.jsonl",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["status"], "partial");
    assert_eq!(summary["pending"], 6);

    let scored = dialex(
        dir.path(),
        &[
            "score",
            "judgment",
            "--dataset",
            "labeled.tsv",
            "--split",
            "test",
            "--predictions",
            "preds.jsonl",
        ],
    );
    assert_eq!(scored.status.code(), Some(4));
}

#[test]
fn api_keys_are_not_accepted_in_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.toml"),
        "[endpoints.x]\nbase_url = \"http://h\"\nmodel_name = \"m\"\napi_key = \"secret\"\n",
    )
    .unwrap();
    let out = dialex(
        dir.path(),
        &[
            "--config",
            "cfg.toml",
            "score",
            "judgment",
            "--dataset",
            fixture("judgment.tsv").to_str().unwrap(),
            "--system",
            "majority",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("api_key"));
}
