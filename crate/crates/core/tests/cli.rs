//! End-to-end runs of the `casum` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use condense_abstract::pipeline::load_models;

fn casum(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_casum"))
        .current_dir(dir)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("casum runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = casum(dir, args);
    assert!(
        out.status.success(),
        "casum {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn train_condense(dir: &Path, out: &str, seed: &str) {
    ok(
        dir,
        &[
            "train", "--stage", "condense", "--corpus", "toy.jsonl", "--out", out, "--embedding-dim", "64",
            "--hidden-dim", "64", "--epochs", "20", "--min-frequency", "1", "--seed", seed,
        ],
    );
}

#[test]
fn memorized_toy_set_round_trips_through_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gentoy", "--out", "toy.jsonl", "--clusters", "10", "--reviews", "6", "--seed", "7"]);
    let corpus_before = fs::read(d.join("toy.jsonl")).unwrap();

    train_condense(d, "condense.ckpt", "1");
    let log: serde_json::Value = serde_json::from_slice(&fs::read(d.join("condense.ckpt.log.json")).unwrap()).unwrap();
    let epochs = log["report"]["epochs"].as_array().unwrap();
    let loss = |i: usize| epochs[i]["train_loss"].as_f64().unwrap();
    assert!(loss(1) < loss(0), "epoch losses {} then {}", loss(0), loss(1));
    assert_eq!(log["config"]["seed"], 1);

    ok(
        d,
        &[
            "train", "--stage", "abstract", "--corpus", "toy.jsonl", "--checkpoint", "condense.ckpt", "--out",
            "full.ckpt", "--epochs", "60", "--seed", "2",
        ],
    );
    ok(
        d,
        &["summarize", "--corpus", "toy.jsonl", "--checkpoint", "full.ckpt", "--out", "summaries.jsonl", "--workers", "2"],
    );
    let lines = fs::read_to_string(d.join("summaries.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 10);

    ok(
        d,
        &["evaluate", "--corpus", "toy.jsonl", "--predictions", "summaries.jsonl", "--out", "metrics.json"],
    );
    let report: serde_json::Value = serde_json::from_slice(&fs::read(d.join("metrics.json")).unwrap()).unwrap();
    let rouge_l = report["rougeL_f1"].as_f64().unwrap();
    assert!(rouge_l >= 0.9, "ROUGE-L F1 {rouge_l}");
    assert_eq!(report["instances"].as_array().unwrap().len(), 10);

    ok(
        d,
        &["customize", "--corpus", "toy.jsonl", "--checkpoint", "full.ckpt", "--out", "plot.jsonl", "--need", "plot"],
    );
    assert_eq!(fs::read_to_string(d.join("plot.jsonl")).unwrap().lines().count(), 10);

    assert_eq!(fs::read(d.join("toy.jsonl")).unwrap(), corpus_before);
}

#[test]
fn worker_count_does_not_change_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gentoy", "--out", "toy.jsonl", "--clusters", "6", "--reviews", "4", "--seed", "3"]);
    train_condense(d, "c.ckpt", "3");
    ok(
        d,
        &["train", "--stage", "abstract", "--corpus", "toy.jsonl", "--checkpoint", "c.ckpt", "--out", "a.ckpt", "--epochs", "3"],
    );
    for workers in ["1", "3"] {
        let out = format!("s{workers}.jsonl");
        ok(
            d,
            &["summarize", "--corpus", "toy.jsonl", "--checkpoint", "a.ckpt", "--out", &out, "--workers", workers],
        );
    }
    assert_eq!(fs::read(d.join("s1.jsonl")).unwrap(), fs::read(d.join("s3.jsonl")).unwrap());
}

#[test]
fn same_seed_gives_identical_training_logs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gentoy", "--out", "toy.jsonl", "--clusters", "4", "--reviews", "4", "--seed", "5"]);
    let run = |out: &str| {
        ok(
            d,
            &[
                "train", "--stage", "condense", "--corpus", "toy.jsonl", "--out", out, "--embedding-dim", "16",
                "--hidden-dim", "16", "--epochs", "3", "--seed", "9",
            ],
        );
        let log: serde_json::Value = serde_json::from_slice(&fs::read(d.join(format!("{out}.log.json"))).unwrap()).unwrap();
        log["report"].clone()
    };
    assert_eq!(run("a.ckpt"), run("b.ckpt"));
    let params = |name: &str| load_models(&d.join(name)).unwrap().condense;
    assert_eq!(params("a.ckpt"), params("b.ckpt"));
}

#[test]
fn abstract_stage_without_condense_checkpoint_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gentoy", "--out", "toy.jsonl", "--clusters", "2", "--reviews", "3"]);
    let out = casum(d, &["train", "--stage", "abstract", "--corpus", "toy.jsonl", "--out", "a.ckpt"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("needs a condense checkpoint"), "{stderr}");

    let out = casum(
        d,
        &["train", "--stage", "abstract", "--corpus", "toy.jsonl", "--checkpoint", "missing.ckpt", "--out", "a.ckpt"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!d.join("a.ckpt").exists());
}

#[test]
fn extract_picks_the_first_of_identical_reviews() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("same.jsonl"),
        r#"{"id":"m","reviews":["the plot was dull","the plot was dull","the plot was dull"]}"#,
    )
    .unwrap();
    ok(
        d,
        &[
            "train", "--stage", "condense", "--corpus", "same.jsonl", "--out", "c.ckpt", "--embedding-dim", "8",
            "--hidden-dim", "8", "--epochs", "1", "--min-frequency", "1",
        ],
    );
    ok(d, &["extract", "--corpus", "same.jsonl", "--checkpoint", "c.ckpt", "--out", "ext.jsonl", "--k", "1"]);
    let record: serde_json::Value = serde_json::from_str(fs::read_to_string(d.join("ext.jsonl")).unwrap().trim()).unwrap();
    assert_eq!(record["selected"], serde_json::json!([0]));
    assert_eq!(record["summary"], "the plot was dull");
}

#[test]
fn exit_codes_separate_usage_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(casum(d, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(casum(d, &["summarize", "--corpus", "x.jsonl"]).status.code(), Some(1));
    assert_eq!(casum(d, &["--help"]).status.code(), Some(0));

    fs::write(d.join("bad.jsonl"), "{\"id\":\"a\",\"reviews\":[\"fine\"]}\nnot json\n").unwrap();
    let out = casum(d, &["train", "--stage", "condense", "--corpus", "bad.jsonl", "--out", "c.ckpt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.jsonl:2"));

    assert_eq!(
        casum(d, &["summarize", "--corpus", "bad.jsonl", "--checkpoint", "none.ckpt", "--out", "s"]).status.code(),
        Some(2)
    );
}

#[test]
fn selfcheck_passes_on_a_fresh_build() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["selfcheck", "--seed", "1"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 5, "{stdout}");
}

#[test]
fn dev_corpus_drives_early_stopping_in_both_stages() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gentoy", "--out", "toy.jsonl", "--clusters", "6", "--reviews", "4", "--seed", "11"]);
    ok(d, &["gentoy", "--out", "dev.jsonl", "--clusters", "3", "--reviews", "4", "--seed", "12"]);
    let common = ["--corpus", "toy.jsonl", "--dev", "dev.jsonl", "--epochs", "4", "--patience", "1"];
    let mut condense = vec!["train", "--stage", "condense", "--out", "c.ckpt", "--embedding-dim", "16", "--hidden-dim", "16"];
    condense.extend(common);
    ok(d, &condense);
    let mut abstract_stage = vec!["train", "--stage", "abstract", "--checkpoint", "c.ckpt", "--out", "a.ckpt"];
    abstract_stage.extend(common);
    ok(d, &abstract_stage);
    for name in ["c.ckpt.log.json", "a.ckpt.log.json"] {
        let log: serde_json::Value = serde_json::from_slice(&fs::read(d.join(name)).unwrap()).unwrap();
        let report = &log["report"];
        assert!(report["best_epoch"].is_u64(), "{name}: {report}");
        assert!(report["epochs"].as_array().unwrap().iter().all(|e| e["dev_score"].is_f64()), "{name}");
    }
}
