use std::fs;
use std::path::Path;
use std::process::Command;

use beamtree::cli::{EvaluateCommand, Manifest, StatsCommand, TrainCommand};
use beamtree::synth::SyntheticSpec;
use beamtree::toy::ToyGrid;

fn beamtree(args: &[&str], dir: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_beamtree"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
        .status
        .code()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

/// Everything but the trailing wall-clock column.
fn log_without_time(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect()
}

fn pipeline(dir: &Path) {
    write(dir, "synth.json", r#"{"num_targets": 40, "feature_dim": 3, "bias": -2.0, "n_train": 200, "n_test": 50, "seed": 4}"#);
    write(
        dir,
        "train.json",
        r#"{"train_data": "data/train.jsonl", "arity": 3,
            "trainer": {"method": "OTM", "beam_size": 5, "epochs": 2, "batch_size": 20, "learning_rate": 0.02, "seed": 3}}"#,
    );
    write(
        dir,
        "eval.json",
        r#"{"test_data": "data/test.jsonl", "tree": "model/tree.json", "checkpoint": "model/checkpoint.json",
            "beam_size": 5, "m_values": [1, 3, 5]}"#,
    );
    write(dir, "stats.json", r#"{"data": "data/train.jsonl", "tree": "model/tree.json", "level": 2}"#);
    write(
        dir,
        "toy.json",
        r#"{"num_targets": 50, "arity": 2, "estimators": ["DirEst", "OptEst"], "sample_sizes": [20, "inf"],
            "cells": [[1, 1], [5, 1], [5, 5]], "runs": 3, "seed": 2}"#,
    );
    assert_eq!(beamtree(&["synth-gen", "--config", "synth.json", "--out", "data"], dir), 0);
    assert_eq!(beamtree(&["train", "--config", "train.json", "--out", "model"], dir), 0);
    assert_eq!(beamtree(&["evaluate", "--config", "eval.json", "--out", "eval"], dir), 0);
    assert_eq!(beamtree(&["stats", "--config", "stats.json", "--out", "stats"], dir), 0);
    assert_eq!(beamtree(&["toy", "--config", "toy.json", "--out", "toy"], dir), 0);
}

#[test]
fn commands_are_reproducible_byte_for_byte() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path());
    pipeline(b.path());
    for file in [
        "data/train.jsonl",
        "data/test.jsonl",
        "data/manifest.json",
        "model/tree.json",
        "model/checkpoint.json",
        "model/manifest.json",
        "eval/metrics.csv",
        "eval/regret.csv",
        "eval/summary.json",
        "stats/level_distribution.csv",
        "toy/toy.csv",
        "toy/summary.json",
    ] {
        let x = fs::read(a.path().join(file)).unwrap();
        let y = fs::read(b.path().join(file)).unwrap();
        assert!(x == y, "{file} differs");
    }
    assert_eq!(
        log_without_time(&a.path().join("model/train_log.csv")),
        log_without_time(&b.path().join("model/train_log.csv"))
    );

    let toy = fs::read_to_string(a.path().join("toy/toy.csv")).unwrap();
    let mut lines = toy.lines();
    assert_eq!(lines.next(), Some("estimator,N,k,m,mean_regret,std_err,runs"));
    assert_eq!(lines.count(), 12);
    assert!(toy.contains("OptEst,inf,5,5,0,0,3"));
    let regret = fs::read_to_string(a.path().join("eval/regret.csv")).unwrap();
    assert_eq!(regret.lines().count(), 4);
}

#[test]
fn manifests_revalidate_as_configs() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path());
    let manifest = |sub: &str| -> Manifest {
        serde_json::from_str(&fs::read_to_string(dir.path().join(sub).join("manifest.json")).unwrap())
            .unwrap()
    };
    let m = manifest("data");
    assert_eq!(m.command, "synth-gen");
    let spec: SyntheticSpec = serde_json::from_value(m.config).unwrap();
    assert_eq!(spec.seed, 4);
    let _: TrainCommand = serde_json::from_value(manifest("model").config).unwrap();
    let _: EvaluateCommand = serde_json::from_value(manifest("eval").config).unwrap();
    let _: StatsCommand = serde_json::from_value(manifest("stats").config).unwrap();
    let _: ToyGrid = serde_json::from_value(manifest("toy").config).unwrap();
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "synth.json", r#"{"num_targets": 5, "feature_dim": 2, "bias": 0.0, "n_train": 3, "n_test": 0, "seed": 1}"#);
    assert_eq!(beamtree(&["synth-gen", "--config", "synth.json", "--seed", "9", "--out", "a"], d), 0);
    let header = fs::read_to_string(d.join("a/train.jsonl")).unwrap();
    assert!(header.starts_with(r#"{"M":5,"d":2,"c":0.0,"seed":9,"split":"train"}"#));
    assert!(!d.join("a/test.jsonl").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "unknown.json", r#"{"num_targets": 5, "feature_dim": 2, "bias": 0.0, "n_train": 3, "n_test": 0, "seed": 1, "extra": 1}"#);
    assert_eq!(beamtree(&["synth-gen", "--config", "unknown.json"], d), 2);
    assert_eq!(beamtree(&["synth-gen"], d), 2);
    assert_eq!(beamtree(&["no-such-command"], d), 2);

    write(d, "bad.jsonl", "{\"M\":3,\"d\":1,\"c\":null,\"seed\":null,\"split\":\"train\"}\n{\"x\":[1.0,2.0],\"targets\":[0]}\n");
    write(
        d,
        "train.json",
        r#"{"train_data": "bad.jsonl", "trainer": {"method": "TDM", "beam_size": 2, "epochs": 1, "batch_size": 1, "learning_rate": 0.1, "seed": 0}}"#,
    );
    assert_eq!(beamtree(&["train", "--config", "train.json"], d), 3);

    write(d, "ok.jsonl", "{\"M\":3,\"d\":1,\"c\":null,\"seed\":null,\"split\":\"train\"}\n{\"x\":[1e150],\"targets\":[0]}\n");
    write(
        d,
        "diverge.json",
        r#"{"train_data": "ok.jsonl", "trainer": {"method": "TDM", "beam_size": 2, "epochs": 3, "batch_size": 1, "learning_rate": 1e300, "seed": 0}}"#,
    );
    assert_eq!(beamtree(&["train", "--config", "diverge.json", "--out", "dv"], d), 4);
}
