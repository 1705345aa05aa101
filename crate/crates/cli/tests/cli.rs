//! Command-level contract tests: exit codes, manifests, reports, reruns.

use std::path::Path;
use std::process::{Command, Output};

fn ards(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ards"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = ards(dir, args);
    assert!(
        out.status.success(),
        "ards {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn expect_code(dir: &Path, args: &[&str], code: i32) {
    let out = ards(dir, args);
    assert_eq!(
        out.status.code(),
        Some(code),
        "ards {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synth_is_reproducible_and_writes_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["synth", "--n", "100", "--seed", "7", "--out", "a.csv"]);
    ok(dir, &["synth", "--n", "100", "--seed", "7", "--out", "b.csv"]);
    assert_eq!(
        std::fs::read(dir.join("a.csv")).unwrap(),
        std::fs::read(dir.join("b.csv")).unwrap()
    );
    assert_eq!(
        std::fs::read_to_string(dir.join("a.csv")).unwrap().lines().count(),
        101 // header + 100 rows
    );

    let manifest = read_json(&dir.join("a.csv.manifest.json"));
    assert_eq!(manifest["command"], "synth");
    assert_eq!(manifest["seeds"][0], 7);
    assert_eq!(manifest["row_counts"]["a.csv"], 100);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn synth_usage_and_io_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    // clap rejects a missing --out with its usage exit code
    expect_code(dir, &["synth", "--n", "100", "--seed", "7"], 2);
    expect_code(dir, &["synth", "--n", "1", "--seed", "7", "--out", "a.csv"], 2);
    // unwritable output directory is a runtime failure
    expect_code(
        dir,
        &["synth", "--n", "10", "--seed", "7", "--out", "no/such/dir/a.csv"],
        1,
    );
}

#[test]
fn gen_presets_and_histogram_export() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["synth", "--n", "100", "--seed", "3", "--out", "d.csv"]);
    ok(dir, &[
        "gen", "--source", "d.csv", "--preset", "DataGen2", "--split", "val",
        "--seed", "5", "--out", "g.csv", "--save-hist", "h.json",
    ]);

    // 100 source rows × 50 variants
    assert_eq!(
        std::fs::read_to_string(dir.join("g.csv")).unwrap().lines().count(),
        5001
    );
    let manifest = read_json(&dir.join("g.csv.manifest.json"));
    assert_eq!(manifest["details"]["n_bins"], 200);
    assert_eq!(manifest["details"]["n_vars"], 10);
    assert_eq!(manifest["details"]["variants_per_sample"], 50);
    assert_eq!(manifest["row_counts"]["g.csv"], 5000);
    assert_eq!(
        manifest["details"]["feature_ranges"].as_array().unwrap().len(),
        87
    );

    // exported histograms reload and carry the fitted row count
    let em = ards_core::hist::EmpiricalModel::load_json(dir.join("h.json")).unwrap();
    assert_eq!(em.histogram(0).total(), 100);
    assert_eq!(em.histogram(0).n_bins(), 200);
}

#[test]
fn gen_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["synth", "--n", "50", "--seed", "3", "--out", "d.csv"]);
    expect_code(dir, &[
        "gen", "--source", "d.csv", "--preset", "DataGen3", "--split", "train",
        "--seed", "1", "--out", "g.csv",
    ], 2);
    expect_code(dir, &[
        "gen", "--source", "d.csv", "--n-bins", "10", "--n-vars", "90",
        "--variants", "2", "--seed", "1", "--out", "g.csv",
    ], 2);
    expect_code(dir, &["gen", "--source", "d.csv", "--seed", "1", "--out", "g.csv"], 2);
}

#[test]
fn train_defaults_report_and_rerun_identity() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["synth", "--n", "300", "--seed", "4", "--out", "d.csv"]);
    let args = [
        "train", "--data", "d.csv", "--seed", "9", "--batch-size", "128",
        "--input-dropout", "0.075", "--out", "m1.json",
    ];
    ok(dir, &args);
    // epochs defaults to 1: every row seen once ⇒ ceil(300/128) = 3 steps
    let report = read_json(&dir.join("m1.json.report.json"));
    assert_eq!(report["steps"], 3);
    assert_eq!(report["seed"], 9);
    assert!(report["final_loss"].as_f64().unwrap() > 0.0);

    let mut rerun = args;
    rerun[rerun.len() - 1] = "m2.json";
    ok(dir, &rerun);
    assert_eq!(
        std::fs::read(dir.join("m1.json")).unwrap(),
        std::fs::read(dir.join("m2.json")).unwrap()
    );
}

#[test]
fn train_rejects_unreadable_config_and_bad_data() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["synth", "--n", "50", "--seed", "4", "--out", "d.csv"]);
    expect_code(dir, &[
        "train", "--data", "d.csv", "--config", "missing.json", "--out", "m.json",
    ], 2);
    std::fs::write(dir.join("bad.json"), "{not json").unwrap();
    expect_code(dir, &[
        "train", "--data", "d.csv", "--config", "bad.json", "--out", "m.json",
    ], 2);

    // corrupt a label: data errors are runtime failures
    let text = std::fs::read_to_string(dir.join("d.csv")).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let n = lines[3].rfind(',').unwrap();
    lines[3].truncate(n + 1);
    lines[3].push('5');
    std::fs::write(dir.join("bad.csv"), lines.join("\n") + "\n").unwrap();
    expect_code(dir, &["train", "--data", "bad.csv", "--out", "m.json"], 1);
}

#[test]
fn train_ensemble_default_grid_writes_four_models() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["synth", "--n", "200", "--seed", "6", "--out", "clean.csv"]);
    ok(dir, &[
        "gen", "--source", "clean.csv", "--n-bins", "20", "--n-vars", "5",
        "--variants", "5", "--seed", "8", "--out", "gen1.ards",
    ]);
    let spec = serde_json::json!({
        "datasets": {
            "DataAug1": ["clean.csv", "gen1.ards"],
            "DataAug2": ["clean.csv", "gen1.ards", "gen1.ards"],
        },
        "train": { "seed": 12, "batch_size": 256 },
    });
    std::fs::write(dir.join("spec.json"), spec.to_string()).unwrap();
    ok(dir, &["train-ensemble", "--spec", "spec.json", "--out", "models"]);

    for k in 0..4 {
        let m = ards_core::ModelParams::load_json(dir.join(format!("models/model_{k}.json")))
            .unwrap();
        let expected = if k < 2 { 0.075 } else { 0.125 };
        assert_eq!(m.input_dropout, expected);
    }
    let manifest = read_json(&dir.join("models/ensemble.manifest.json"));
    assert_eq!(manifest["details"]["members"].as_array().unwrap().len(), 4);

    // a member pointing at an unknown dataset id is a usage error
    let bad = serde_json::json!({
        "datasets": { "DataAug1": ["clean.csv"] },
        "members": [ { "input_dropout": 0.1, "dataset_id": "DataAugX", "seed": 1 } ],
    });
    std::fs::write(dir.join("bad_spec.json"), bad.to_string()).unwrap();
    expect_code(dir, &["train-ensemble", "--spec", "bad_spec.json", "--out", "m2"], 2);
}

#[test]
fn attack_and_eval_contracts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["synth", "--n", "240", "--seed", "14", "--out", "d.csv"]);
    ok(dir, &[
        "train", "--data", "d.csv", "--seed", "2", "--batch-size", "64",
        "--input-dropout", "0.075", "--out", "m.json",
    ]);

    // n_vars = 0 makes every try the identity: the success rate must equal
    // the model's clean error rate
    ok(dir, &[
        "attack", "--model", "m.json", "--data", "d.csv", "--n-vars", "0",
        "--n-bins", "10", "--max-tries", "3", "--seed", "5", "--out", "adv0.csv",
    ]);
    ok(dir, &[
        "eval", "--model", "m.json", "--clean", "d.csv", "--adv", "d.csv",
        "--out", "same.json",
    ]);
    let same = read_json(&dir.join("same.json"));
    assert_eq!(same["clean_acc"], same["adv_acc"]);
    let report = read_json(&dir.join("adv0.csv.report.json"));
    let clean_acc = same["clean_acc"].as_f64().unwrap();
    let success = report["success_rate"].as_f64().unwrap();
    assert!((success - (1.0 - clean_acc)).abs() < 1e-12);

    // a real attack, then the metrics document invariants
    ok(dir, &[
        "attack", "--model", "m.json", "--data", "d.csv", "--n-vars", "5",
        "--n-bins", "30", "--max-tries", "10", "--seed", "5", "--out", "adv.csv",
    ]);
    ok(dir, &[
        "eval", "--model", "m.json", "--clean", "d.csv", "--adv", "adv.csv",
        "--attack-report", "adv.csv.report.json", "--out", "metrics.json",
    ]);
    let metrics = read_json(&dir.join("metrics.json"));
    let clean = metrics["clean_acc"].as_f64().unwrap();
    let adv = metrics["adv_acc"].as_f64().unwrap();
    assert_eq!(metrics["mixed_score"].as_f64().unwrap(), (clean + adv) / 2.0);
    assert_eq!(metrics["n_clean"], 240);
    assert_eq!(metrics["n_adv"], 240);
    assert!(metrics["attack_success_rate"].as_f64().is_some());

    // schema mismatch between model and data: usage error
    ok(dir, &["synth", "--n", "50", "--seed", "1", "--out", "tiny.csv"]);
    let text = std::fs::read_to_string(dir.join("tiny.csv")).unwrap();
    let renamed_header: Vec<String> = (0..87).map(|i| format!("col{i}")).collect();
    let mut lines: Vec<&str> = text.lines().collect();
    let header = format!("{},label", renamed_header.join(","));
    lines[0] = &header;
    std::fs::write(dir.join("renamed.csv"), lines.join("\n") + "\n").unwrap();
    expect_code(dir, &[
        "attack", "--model", "m.json", "--data", "renamed.csv", "--n-vars", "1",
        "--n-bins", "4", "--seed", "1", "--out", "x.csv",
    ], 2);
}
