//! End-to-end tests of the `auscult` binary: flag handling, exit codes, and
//! the file artifacts each stage writes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use auscult::fixtures::{table1_fixture, Table1Fixture};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_auscult"));
    cmd.env_remove("AUSCULT_CONFIG");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn fixture(dir: &Path) -> Table1Fixture {
    table1_fixture(dir, 400).expect("fixture generates")
}

fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("small.toml");
    fs::write(
        &path,
        r#"
window_s = 5.0
sample_rate_hz = 400
classes = ["URTI", "Healthy", "COPD", "Bronchiectasis", "Bronchiolitis"]
pool1d = 4
dense = [16]

[conv1]
channels = 6
kernel = 16
stride = 8

[conv2]
channels = 8
kernel = 8
stride = 4

[[conv2d_blocks]]
channels = 6
kernel = [3, 3]
pool = [2, 4]

[fusion]
enabled = false
include_gender = false
"#,
    )
    .unwrap();
    path
}

#[test]
fn no_arguments_prints_usage_and_exits_1() {
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(1));
    let text = format!("{}{}", stdout(&out), stderr(&out));
    assert!(text.contains("Usage"), "{text}");
}

#[test]
fn unknown_flags_are_rejected() {
    let out = run(&["stats", "--manifest", "x.tsv", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exists_for_every_subcommand_and_documents_flags() {
    let expected: &[(&str, &[&str])] = &[
        ("stats", &["--manifest", "--age-group-width", "--allow-empty", "--format"]),
        (
            "select",
            &[
                "--manifest",
                "--device",
                "--drop-classes",
                "--test-fraction",
                "--seed",
                "--out-manifest",
                "--out-split",
            ],
        ),
        (
            "frame",
            &["--manifest", "--split", "--window", "--stride", "--sample-rate", "--out-dir"],
        ),
        (
            "train",
            &[
                "--frames",
                "--model-config",
                "--out",
                "--manifest",
                "--demographics",
                "--history",
                "--epochs",
                "--batch-size",
                "--learning-rate",
                "--lr-decay",
                "--optimizer",
                "--seed",
                "--patience",
                "--val-fraction",
                "--class-weights",
                "--no-normalize",
            ],
        ),
        (
            "eval",
            &["--frames", "--model", "--manifest", "--demographics", "--out", "--format", "--no-normalize"],
        ),
        (
            "bench",
            &["--model", "--label", "--power-mw", "--power-sensor", "--runs", "--warmup", "--seed", "--out", "--format"],
        ),
    ];
    for (cmd, flags) in expected {
        let out = run(&[cmd, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{cmd} --help");
        let text = stdout(&out);
        for flag in *flags {
            assert!(text.contains(flag), "{cmd} --help missing {flag}:\n{text}");
        }
    }
}

#[test]
fn stats_prints_per_class_durations() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixture(dir.path());
    let out = run(&["stats", "--manifest", fx.train_manifest.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    for (class, duration) in [
        ("URTI", "380"),
        ("Healthy", "560"),
        ("COPD", "580"),
        ("Bronchiectasis", "260"),
        ("Bronchiolitis", "220"),
    ] {
        let line = text
            .lines()
            .find(|l| l.starts_with(class))
            .unwrap_or_else(|| panic!("no row for {class}:\n{text}"));
        assert!(line.contains(duration), "{line}");
    }
    // JSON variant parses.
    let out = run(&[
        "stats",
        "--manifest",
        fx.train_manifest.to_str().unwrap(),
        "--format",
        "json",
    ]);
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(parsed["total_subjects"], 52);
}

#[test]
fn stats_missing_manifest_is_a_data_error() {
    let out = run(&["stats", "--manifest", "/nonexistent/m.tsv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("error:"));
}

#[test]
fn select_filters_device_and_classes() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixture(dir.path());
    let out_manifest = dir.path().join("selected.tsv");
    let out_split = dir.path().join("split.json");
    let out = run(&[
        "select",
        "--manifest",
        fx.database_manifest.to_str().unwrap(),
        "--out-manifest",
        out_manifest.to_str().unwrap(),
        "--out-split",
        out_split.to_str().unwrap(),
        "--seed",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    // The five distractor rows disappear; 123 selected recordings remain.
    let selected = auscult::manifest::load_manifest(&out_manifest).unwrap();
    assert_eq!(selected.entries.len(), 123);
    assert!(selected
        .entries
        .iter()
        .all(|e| e.meta.device == auscult_core::dataset::Device::Meditron));
    let split: auscult_core::dataset::SplitSpec =
        serde_json::from_str(&fs::read_to_string(&out_split).unwrap()).unwrap();
    assert!(split.train_subjects.is_disjoint(&split.test_subjects));
    assert_eq!(split.classes.len(), 5);

    // Same seed reproduces the same artifacts byte for byte.
    let again_manifest = dir.path().join("selected2.tsv");
    let again_split = dir.path().join("split2.json");
    let out = run(&[
        "select",
        "--manifest",
        fx.database_manifest.to_str().unwrap(),
        "--out-manifest",
        again_manifest.to_str().unwrap(),
        "--out-split",
        again_split.to_str().unwrap(),
        "--seed",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read(&out_manifest).unwrap(), fs::read(&again_manifest).unwrap());
    assert_eq!(fs::read(&out_split).unwrap(), fs::read(&again_split).unwrap());
}

#[test]
fn select_empty_result_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixture(dir.path());
    // The fixture train manifest has no Microphone rows at all.
    let out = run(&[
        "select",
        "--manifest",
        fx.train_manifest.to_str().unwrap(),
        "--device",
        "Microphone",
        "--out-manifest",
        dir.path().join("sel.tsv").to_str().unwrap(),
        "--out-split",
        dir.path().join("split.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("no recordings"), "{}", stderr(&out));
}

#[test]
fn frame_writes_train_and_test_sets_with_split() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixture(dir.path());
    let frames_dir = dir.path().join("frames");
    let out = run(&[
        "frame",
        "--manifest",
        fx.all_manifest.to_str().unwrap(),
        "--split",
        fx.split.to_str().unwrap(),
        "--window",
        "5",
        "--stride",
        "1",
        "--sample-rate",
        "400",
        "--out-dir",
        frames_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("1600 frames written (train)"), "{text}");
    assert!(text.contains("368 frames written (test)"), "{text}");
    let (frames, meta) = auscult::framefile::read_frames(frames_dir.join("frames_train")).unwrap();
    assert_eq!(frames.len(), 1600);
    assert_eq!(frames[0].samples.len(), 2000);
    assert_eq!(meta.classes.len(), 5);
}

#[test]
fn frame_without_split_writes_one_set() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixture(dir.path());
    let frames_dir = dir.path().join("frames");
    let out = run(&[
        "frame",
        "--manifest",
        fx.test_manifest.to_str().unwrap(),
        "--window",
        "5",
        "--stride",
        "1",
        "--sample-rate",
        "400",
        "--out-dir",
        frames_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("368 frames written (all)"), "{}", stdout(&out));
}

fn frame_fixture(dir: &Path) -> (Table1Fixture, PathBuf) {
    let fx = fixture(dir);
    let frames_dir = dir.join("frames");
    let out = run(&[
        "frame",
        "--manifest",
        fx.all_manifest.to_str().unwrap(),
        "--split",
        fx.split.to_str().unwrap(),
        "--window",
        "5",
        "--stride",
        "1",
        "--sample-rate",
        "400",
        "--out-dir",
        frames_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    (fx, frames_dir)
}

#[test]
fn train_eval_bench_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (_fx, frames_dir) = frame_fixture(dir.path());
    let config = small_config(dir.path());
    let model = dir.path().join("model.bin");
    let history = dir.path().join("history.csv");
    let out = run(&[
        "train",
        "--frames",
        frames_dir.join("frames_train").to_str().unwrap(),
        "--model-config",
        config.to_str().unwrap(),
        "--out",
        model.to_str().unwrap(),
        "--history",
        history.to_str().unwrap(),
        "--epochs",
        "3",
        "--seed",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(model.is_file());
    let history_text = fs::read_to_string(&history).unwrap();
    assert!(history_text.starts_with("epoch,train_loss,val_loss,val_accuracy\n"));
    assert_eq!(history_text.lines().count(), 4);

    let report = dir.path().join("report.json");
    let out = run(&[
        "eval",
        "--frames",
        frames_dir.join("frames_test").to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("Accuracy"), "{text}");
    let parsed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(parsed["frame_level"]["total"], 368);
    assert_eq!(parsed["frame_level"]["class_names"].as_array().unwrap().len(), 5);

    let bench_out = dir.path().join("bench.json");
    let out = run(&[
        "bench",
        "--model",
        model.to_str().unwrap(),
        "--power-mw",
        "881",
        "--runs",
        "10",
        "--warmup",
        "2",
        "--label",
        "test box",
        "--out",
        bench_out.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("Energy Eff (GFLOPS/W)"), "{text}");
    let reports = auscult::bench::from_json(&fs::read_to_string(&bench_out).unwrap()).unwrap();
    assert_eq!(reports.len(), 1);
    assert_eq!(reports[0].power_mw, Some(881.0));
    assert_eq!(reports[0].latency.samples_s.len(), 10);
}

#[test]
fn bench_zero_runs_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let (_fx, frames_dir) = frame_fixture(dir.path());
    let config = small_config(dir.path());
    let model = dir.path().join("model.bin");
    let out = run(&[
        "train",
        "--frames",
        frames_dir.join("frames_train").to_str().unwrap(),
        "--model-config",
        config.to_str().unwrap(),
        "--out",
        model.to_str().unwrap(),
        "--epochs",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let out = run(&["bench", "--model", model.to_str().unwrap(), "--runs", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("at least 10"), "{}", stderr(&out));
}

#[test]
fn numeric_failure_during_training_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let (_fx, frames_dir) = frame_fixture(dir.path());
    let config = small_config(dir.path());
    // An absurd SGD learning rate overflows f32 weights within an epoch.
    let out = run(&[
        "train",
        "--frames",
        frames_dir.join("frames_train").to_str().unwrap(),
        "--model-config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("m.bin").to_str().unwrap(),
        "--epochs",
        "3",
        "--optimizer",
        "sgd",
        "--learning-rate",
        "1e30",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    let msg = stderr(&out);
    assert!(msg.contains("batch"), "{msg}");
}

#[test]
fn split_on_fixture_covers_every_class_on_both_sides() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixture(dir.path());
    let manifest = auscult::manifest::load_manifest(&fx.all_manifest).unwrap();
    let recordings = manifest.recordings();
    for seed in 0..5u64 {
        let split =
            auscult_core::dataset::split_subjects(&recordings, 0.19, seed).unwrap();
        assert!(split.train_subjects.is_disjoint(&split.test_subjects));
        assert_eq!(split.classes.len(), 5);
        for class in &split.classes {
            let on_side = |subjects: &std::collections::BTreeSet<String>| {
                recordings
                    .iter()
                    .any(|r| r.diagnosis == *class && subjects.contains(&r.subject_id))
            };
            assert!(on_side(&split.train_subjects), "{class:?} missing from train");
            assert!(on_side(&split.test_subjects), "{class:?} missing from test");
        }
    }
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixture(dir.path());
    let cfg = dir.path().join("pipeline.toml");
    fs::write(&cfg, "[frame]\nwindow_s = 10.0\nstride_s = 10.0\nsample_rate_hz = 400\n").unwrap();

    // Config default: 10 s windows at 10 s stride -> 2 frames per 20 s
    // recording, 23 test recordings -> 46 frames.
    let frames_dir = dir.path().join("frames_cfg");
    let out = bin()
        .args([
            "frame",
            "--config",
            cfg.to_str().unwrap(),
            "--manifest",
            fx.test_manifest.to_str().unwrap(),
            "--out-dir",
            frames_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("46 frames written (all)"), "{}", stdout(&out));

    // Explicit flag beats the config value.
    let frames_dir2 = dir.path().join("frames_flag");
    let out = bin()
        .args([
            "frame",
            "--config",
            cfg.to_str().unwrap(),
            "--manifest",
            fx.test_manifest.to_str().unwrap(),
            "--window",
            "5",
            "--stride",
            "1",
            "--out-dir",
            frames_dir2.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("368 frames written (all)"), "{}", stdout(&out));

    // The environment variable names the same config.
    let frames_dir3 = dir.path().join("frames_env");
    let out = bin()
        .env("AUSCULT_CONFIG", cfg.to_str().unwrap())
        .args([
            "frame",
            "--manifest",
            fx.test_manifest.to_str().unwrap(),
            "--out-dir",
            frames_dir3.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("46 frames written (all)"), "{}", stdout(&out));
}

#[test]
fn eval_fusion_model_requires_demographics() {
    let dir = tempfile::tempdir().unwrap();
    let (fx, frames_dir) = frame_fixture(dir.path());
    // Fusion config at fixture scale.
    let config = dir.path().join("fusion_small.toml");
    let text = fs::read_to_string(small_config(dir.path())).unwrap();
    fs::write(&config, text.replace("enabled = false", "enabled = true")).unwrap();
    let model = dir.path().join("fusion.bin");
    // Training without a manifest fails with a usage error.
    let out = run(&[
        "train",
        "--frames",
        frames_dir.join("frames_train").to_str().unwrap(),
        "--model-config",
        config.to_str().unwrap(),
        "--out",
        model.to_str().unwrap(),
        "--epochs",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(stderr(&out).contains("demographic"), "{}", stderr(&out));

    // With the manifest it trains and evaluates.
    let out = run(&[
        "train",
        "--frames",
        frames_dir.join("frames_train").to_str().unwrap(),
        "--model-config",
        config.to_str().unwrap(),
        "--manifest",
        fx.all_manifest.to_str().unwrap(),
        "--out",
        model.to_str().unwrap(),
        "--epochs",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let out = run(&[
        "eval",
        "--frames",
        frames_dir.join("frames_test").to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--manifest",
        fx.all_manifest.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}
