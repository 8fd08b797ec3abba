//! End-to-end tests of the `tsaudit` binary: artifacts, determinism and
//! exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

const TINY_COHORT: &str = "S=6,K=2,m=8,T=8,C=1";

fn tsaudit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsaudit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn expect_code(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr),
    );
}

fn stderr_contains(output: &Output, needle: &str) {
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains(needle), "stderr `{stderr}` missing `{needle}`");
}

/// Fast training flags so audit-driving tests stay quick.
const FAST: &[&str] = &["--seeds", "41,42", "--epochs", "4", "--hidden-width", "4", "--batch-size", "8"];

fn run_tiny_audit(out: &Path, extra: &[&str]) -> Output {
    let out_str = out.to_str().unwrap();
    let mut args = vec!["audit", "--synth-type3", TINY_COHORT, "--out", out_str];
    args.extend_from_slice(FAST);
    args.extend_from_slice(extra);
    tsaudit(&args)
}

#[test]
fn help_exits_zero() {
    let output = tsaudit(&["--help"]);
    expect_code(&output, 0);
    assert!(String::from_utf8_lossy(&output.stdout).contains("audit"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let output = tsaudit(&["audit", "--bogus"]);
    expect_code(&output, 2);
}

#[test]
fn gen_writes_dataset_and_is_deterministic() {
    let dir = tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let output = tsaudit(&[
            "gen",
            "--synth-type3",
            TINY_COHORT,
            "--breakdown",
            "--out",
            out.to_str().unwrap(),
        ]);
        expect_code(&output, 0);
        for name in
            ["dataset.jsonl", "dataset.manifest.json", "dataset.breakdown.jsonl", "manifest.json"]
        {
            assert!(out.join(name).exists(), "{name} missing");
        }
    }
    for name in ["dataset.jsonl", "dataset.manifest.json", "dataset.breakdown.jsonl"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name} differs between identical gens"
        );
    }
}

#[test]
fn gen_respects_csv_format() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("g");
    let output = tsaudit(&[
        "gen",
        "--synth-type3",
        TINY_COHORT,
        "--dataset-format",
        "csv",
        "--out",
        out.to_str().unwrap(),
    ]);
    expect_code(&output, 0);
    assert!(out.join("dataset.csv").exists());
    assert!(out.join("dataset.manifest.json").exists());
}

#[test]
fn conflicting_dataset_sources_are_a_config_error() {
    let dir = tempdir().unwrap();
    let output = tsaudit(&[
        "gen",
        "--synth-type3",
        TINY_COHORT,
        "--synth-type2",
        "S=4",
        "--out",
        dir.path().join("x").to_str().unwrap(),
    ]);
    expect_code(&output, 2);
    stderr_contains(&output, "conflicting dataset sources");
}

#[test]
fn existing_out_dir_is_a_config_error() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("g");
    expect_code(&tsaudit(&["gen", "--synth-type3", TINY_COHORT, "--out", out.to_str().unwrap()]), 0);
    let output = tsaudit(&["gen", "--synth-type3", TINY_COHORT, "--out", out.to_str().unwrap()]);
    expect_code(&output, 2);
    stderr_contains(&output, "write-once");
}

#[test]
fn missing_dataset_file_is_a_data_error() {
    let dir = tempdir().unwrap();
    let output = tsaudit(&[
        "split",
        "--dataset",
        dir.path().join("nope.jsonl").to_str().unwrap(),
        "--setup",
        "sub-dep-mixed",
        "--out",
        dir.path().join("s").to_str().unwrap(),
    ]);
    expect_code(&output, 3);
}

#[test]
fn holding_out_all_subjects_is_a_data_error() {
    // Two subjects cannot support a subject-exclusive val+test holdout.
    let dir = tempdir().unwrap();
    let gen_out = dir.path().join("g");
    expect_code(
        &tsaudit(&["gen", "--synth-type3", "S=2,K=2,m=8,T=8,C=1", "--out", gen_out.to_str().unwrap()]),
        0,
    );
    let output = tsaudit(&[
        "split",
        "--dataset",
        gen_out.join("dataset.jsonl").to_str().unwrap(),
        "--setup",
        "sub-indep-lno",
        "--n-val-subjects",
        "1",
        "--n-test-subjects",
        "1",
        "--out",
        dir.path().join("s").to_str().unwrap(),
    ]);
    expect_code(&output, 3);
    stderr_contains(&output, "at least one training subject");
}

#[test]
fn split_emits_split_report_and_relabel_when_transformed() {
    let dir = tempdir().unwrap();
    let gen_out = dir.path().join("g");
    expect_code(
        &tsaudit(&["gen", "--synth-type3", TINY_COHORT, "--out", gen_out.to_str().unwrap()]),
        0,
    );
    let dataset = gen_out.join("dataset.jsonl");

    let plain = dir.path().join("plain");
    expect_code(
        &tsaudit(&[
            "split",
            "--dataset",
            dataset.to_str().unwrap(),
            "--setup",
            "sub-dep-mixed",
            "--out",
            plain.to_str().unwrap(),
        ]),
        0,
    );
    assert!(plain.join("split.json").exists());
    assert!(plain.join("split_report.json").exists());
    assert!(!plain.join("relabel.json").exists());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(plain.join("split_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["violations"], serde_json::json!([]));

    let relabeled = dir.path().join("relabeled");
    expect_code(
        &tsaudit(&[
            "split",
            "--dataset",
            dataset.to_str().unwrap(),
            "--setup",
            "r-sub-dep",
            "--out",
            relabeled.to_str().unwrap(),
        ]),
        0,
    );
    assert!(relabeled.join("relabel.json").exists());
}

#[test]
fn eval_writes_a_setup_result() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("e");
    let mut args = vec![
        "eval",
        "--synth-type3",
        TINY_COHORT,
        "--setup",
        "sub-dep-mixed",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(FAST);
    expect_code(&tsaudit(&args), 0);
    let result: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("setup_result.json")).unwrap()).unwrap();
    assert_eq!(result["setup"], "sub-dep-mixed");
    assert_eq!(result["seeds"], serde_json::json!([41, 42]));
    assert_eq!(result["accuracy"]["per_seed"].as_array().unwrap().len(), 2);
}

#[test]
fn audit_rerun_is_byte_identical_and_jobs_invariant() {
    let dir = tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    expect_code(&run_tiny_audit(&a, &[]), 0);
    expect_code(&run_tiny_audit(&b, &[]), 0);
    expect_code(&run_tiny_audit(&c, &["--jobs", "3"]), 0);

    let bytes_a = fs::read(a.join("report.json")).unwrap();
    assert_eq!(bytes_a, fs::read(b.join("report.json")).unwrap(), "rerun changed report.json");
    assert_eq!(bytes_a, fs::read(c.join("report.json")).unwrap(), "--jobs changed report.json");
    assert_eq!(
        fs::read(a.join("report.md")).unwrap(),
        fs::read(b.join("report.md")).unwrap(),
        "rerun changed report.md"
    );
}

#[test]
fn report_rerenders_match_audit_outputs() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("a");
    expect_code(&run_tiny_audit(&out, &[]), 0);
    let json = out.join("report.json");

    // Markdown to stdout equals the audit's report.md.
    let output = tsaudit(&["report", "--in", json.to_str().unwrap()]);
    expect_code(&output, 0);
    assert_eq!(output.stdout, fs::read(out.join("report.md")).unwrap());

    // JSON re-render to a file equals the original byte for byte.
    let rerendered = dir.path().join("rerendered.json");
    expect_code(
        &tsaudit(&[
            "report",
            "--in",
            json.to_str().unwrap(),
            "--format",
            "json",
            "--out",
            rerendered.to_str().unwrap(),
        ]),
        0,
    );
    assert_eq!(fs::read(&rerendered).unwrap(), fs::read(&json).unwrap());
}

#[test]
fn config_file_drives_runs_and_flags_override_it() {
    let dir = tempdir().unwrap();
    let config_path = dir.path().join("run.json");
    fs::write(
        &config_path,
        r#"{"synth_type3": {"n_subjects": 6, "n_classes": 2, "samples_per_subject": 8,
             "n_timestamps": 8, "n_channels": 1},
            "train": {"epochs": 3, "hidden_width": 4, "batch_size": 8},
            "seeds": [41]}"#,
    )
    .unwrap();

    let out = dir.path().join("a");
    let output = tsaudit(&[
        "audit",
        "--config",
        config_path.to_str().unwrap(),
        "--epochs",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    expect_code(&output, 0);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["train"]["epochs"], 2, "flag should override config file");
    assert_eq!(manifest["config"]["train"]["hidden_width"], 4);
    assert_eq!(manifest["config"]["seeds"], serde_json::json!([41]));
    assert!(manifest["inputs"]["config"]["sha256"].as_str().unwrap().len() == 64);
    assert!(manifest["outputs"]["report.json"].as_str().unwrap().len() == 64);

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["environment"]["seeds"], serde_json::json!([41]));
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let dir = tempdir().unwrap();
    let config_path = dir.path().join("run.json");
    fs::write(&config_path, r#"{"sede": [41]}"#).unwrap();
    let output = tsaudit(&[
        "audit",
        "--config",
        config_path.to_str().unwrap(),
        "--out",
        dir.path().join("a").to_str().unwrap(),
    ]);
    expect_code(&output, 2);
    stderr_contains(&output, "unknown field `sede`");
}

#[test]
fn manifest_hashes_dataset_inputs() {
    let dir = tempdir().unwrap();
    let gen_out = dir.path().join("g");
    expect_code(
        &tsaudit(&["gen", "--synth-type3", TINY_COHORT, "--out", gen_out.to_str().unwrap()]),
        0,
    );
    let split_out = dir.path().join("s");
    expect_code(
        &tsaudit(&[
            "split",
            "--dataset",
            gen_out.join("dataset.jsonl").to_str().unwrap(),
            "--setup",
            "sub-dep-mixed",
            "--out",
            split_out.to_str().unwrap(),
        ]),
        0,
    );

    let gen_manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(gen_out.join("manifest.json")).unwrap()).unwrap();
    let split_manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(split_out.join("manifest.json")).unwrap())
            .unwrap();
    // The hash `gen` recorded for its output must match the hash `split`
    // recorded for its input.
    assert_eq!(
        gen_manifest["outputs"]["dataset.jsonl"],
        split_manifest["inputs"]["dataset"]["sha256"],
    );
}
