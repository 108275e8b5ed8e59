use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use wam::pipeline::{load_dataset, TEST_FILE};
use wam::training::{read_mae_csv, write_predictions, RunConfig};

fn small_config() -> RunConfig {
    let mut run = RunConfig::desk();
    run.set_seed(5);
    run.synth.region.lat.count = 48;
    run.synth.region.lon.count = 48;
    run.synth.fires = 80;
    run.synth.last_day = chrono::NaiveDate::from_ymd_opt(2021, 6, 30).unwrap();
    run.data.unlabelled = 64;
    run.model.encoder = "sequential".into();
    run.model.bins = 8;
    run.pretrain.epochs = 2;
    run.pretrain.max_samples = 32;
    run.finetune.epochs = 2;
    run.mapgen.stride = 6;
    run
}

fn wam(out: &Path, config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wam"))
        .args(args)
        .arg("--out")
        .arg(out)
        .arg("--config")
        .arg(config)
        .arg("--threads")
        .arg("1")
        .output()
        .expect("binary runs")
}

fn ok(out: Output) -> String {
    let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(out.status.success(), "command failed: {stderr}");
    stderr
}

/// Writes the config and runs synthesis and ingestion.
fn prepared(dir: &Path) -> PathBuf {
    let config = dir.join("run.toml");
    std::fs::write(&config, small_config().to_toml()).unwrap();
    let out = dir.join("out");
    ok(wam(&out, &config, &["synth-data"]));
    ok(wam(&out, &config, &["ingest"]));
    config
}

#[test]
fn pretrain_twice_gives_identical_logs() {
    let dir = tempfile::tempdir().unwrap();
    let config = prepared(dir.path());
    let out = dir.path().join("out");
    ok(wam(&out, &config, &["pretrain", "--seed", "7"]));
    let log = std::fs::read(out.join("pretrain/pretrain_log.csv")).unwrap();
    let ckpt = std::fs::read(out.join("pretrain/pretrain.ckpt")).unwrap();
    let index = std::fs::read(out.join("artifacts.json")).unwrap();
    ok(wam(&out, &config, &["pretrain", "--seed", "7"]));
    assert_eq!(std::fs::read(out.join("pretrain/pretrain_log.csv")).unwrap(), log);
    assert_eq!(std::fs::read(out.join("pretrain/pretrain.ckpt")).unwrap(), ckpt);
    assert_eq!(std::fs::read(out.join("artifacts.json")).unwrap(), index);
}

#[test]
fn evaluate_on_perfect_predictions_reports_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = prepared(dir.path());
    let out = dir.path().join("out");
    let truth = load_dataset(&out.join("data"), TEST_FILE).unwrap().labels().unwrap();
    let pred = dir.path().join("oracle.csv");
    write_predictions(&pred, &truth).unwrap();
    ok(wam(
        &out,
        &config,
        &["evaluate", "--predictions", pred.to_str().unwrap()],
    ));
    let rows = read_mae_csv(&out.join("evaluate/mae.csv")).unwrap();
    assert_eq!(rows, vec![("oracle".to_string(), [0.0; 6])]);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = prepared(dir.path());
    let out = dir.path().join("out");
    ok(wam(
        &out,
        &config,
        &["pretrain", "--epochs", "1", "--bins", "4", "--seed", "9"],
    ));
    let used = RunConfig::read(&out.join("pretrain/config.toml")).unwrap();
    let file = small_config();
    assert_eq!(used.pretrain.epochs, 1);
    assert_eq!(used.model.bins, 4);
    assert_eq!(used.pretrain.seed, 9);
    assert_eq!(used.pretrain.max_samples, file.pretrain.max_samples);
    assert_eq!(used.model.encoder, file.model.encoder);
    let log = std::fs::read_to_string(out.join("pretrain/pretrain_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 2);
}

#[test]
fn chained_phases_fill_the_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let config = prepared(dir.path());
    let out = dir.path().join("out");
    ok(wam(&out, &config, &["pretrain"]));
    ok(wam(&out, &config, &["finetune", "--mode", "frozen"]));
    let summary = ok(wam(
        &out,
        &config,
        &[
            "evaluate",
            "--checkpoint",
            out.join("finetune/frozen.ckpt").to_str().unwrap(),
        ],
    ));
    assert!(summary.contains("test MAE"));
    ok(wam(&out, &config, &["baselines"]));
    let results = std::fs::read_to_string(out.join("baselines/results.csv")).unwrap();
    assert!(results.lines().next().unwrap().contains("frozen"));
    ok(wam(
        &out,
        &config,
        &[
            "mapgen",
            "--checkpoint",
            out.join("finetune/frozen.ckpt").to_str().unwrap(),
            "--format",
            "csv",
        ],
    ));
    let maps: Vec<_> = std::fs::read_dir(out.join("maps")).unwrap().collect();
    assert_eq!(maps.len(), 12);
    let index = std::fs::read_to_string(out.join("artifacts.json")).unwrap();
    for p in [
        "region/manifest.toml",
        "data/stats.json",
        "finetune/frozen_log.csv",
        "maps/",
    ] {
        assert!(index.contains(p), "{p} missing from the index");
    }
}

#[test]
fn bad_input_fails_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "[pretrain]\nepochz = 3\n").unwrap();
    let res = wam(&out, &config, &["pretrain"]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("epochz"));

    std::fs::write(&config, small_config().to_toml()).unwrap();
    let res = wam(&out, &config, &["pretrain"]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("unlabelled samples not found"));

    let res = wam(&out, &config, &["pretrain", "--learning-rate", "1"]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("--learning-rate"));

    let res = wam(&out, &config, &["finetune", "--mode", "thawed"]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("thawed"));
}
