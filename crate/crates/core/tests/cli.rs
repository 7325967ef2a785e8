//! Command-line contract tests against the built binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_mrcgat")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("spawn mrcgat")
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "mrcgat {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path, name: &str, args: &[&str]) -> PathBuf {
    let path = dir.join(name);
    let mut full = vec!["synth", "--out", path.to_str().unwrap()];
    full.extend_from_slice(args);
    run_ok(&full);
    path
}

#[test]
fn synth_defaults_give_150_subjects_and_identical_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "a.csv", &[]);
    let b = synth(dir.path(), "b.csv", &[]);
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 151);
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("subject_id,label,rf_0"));
    assert!(header.contains("mri_19"));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn train_zero_iterations_writes_initial_parameters_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(
        dir.path(),
        "d.csv",
        &["--n-per-class", "12", "--dims", "2,2,2"],
    );
    let train_to = |out: &str| {
        run_ok(&[
            "train",
            "--data",
            data.to_str().unwrap(),
            "--iterations",
            "0",
            "--q",
            "3",
            "--knn-k",
            "3",
            "--out",
            out,
        ]);
    };
    let m1 = dir.path().join("m1.json");
    let m2 = dir.path().join("m2.json");
    train_to(m1.to_str().unwrap());
    train_to(m2.to_str().unwrap());
    assert_eq!(std::fs::read(&m1).unwrap(), std::fs::read(&m2).unwrap());
    let loaded = mrcgat::model::ModelParameters::load(&m1).unwrap();
    assert_eq!(loaded.config.feature_dim, 6);
}

#[test]
fn train_trace_trends_downward_on_separable_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(
        dir.path(),
        "d.csv",
        &[
            "--n-per-class",
            "12",
            "--dims",
            "2,2,2",
            "--separation",
            "4",
        ],
    );
    let trace = dir.path().join("loss.csv");
    run_ok(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--iterations",
        "300",
        "--q",
        "4",
        "--knn-k",
        "3",
        "--episodes-per-iteration",
        "8",
        "--out",
        dir.path().join("m.json").to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&trace).unwrap();
    let losses: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(losses.len(), 300);
    let first_decile = losses[..30].iter().sum::<f64>() / 30.0;
    let last_decile = losses[270..].iter().sum::<f64>() / 30.0;
    assert!(
        last_decile < first_decile,
        "no downward trend: {first_decile} -> {last_decile}"
    );
}

#[test]
fn eval_two_folds_on_four_subjects_per_class() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(
        dir.path(),
        "d.csv",
        &["--n-per-class", "4", "--dims", "1,1,1", "--separation", "6"],
    );
    let report = dir.path().join("report.json");
    run_ok(&[
        "eval",
        "--data",
        data.to_str().unwrap(),
        "--folds",
        "2",
        "--q",
        "1",
        "--knn-k",
        "2",
        "--iterations",
        "10",
        "--episodes-per-iteration",
        "4",
        "--report",
        report.to_str().unwrap(),
    ]);
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(parsed["mode"], "cross_validation");
    assert_eq!(parsed["folds"].as_array().unwrap().len(), 2);
    // Every subject evaluated exactly once across the folds.
    let mut ids: Vec<String> = parsed["folds"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|f| f["predictions"].as_array().unwrap().iter())
        .map(|p| p["subject_id"].as_str().unwrap().to_string())
        .collect();
    ids.sort();
    assert_eq!(ids.len(), 12);
    ids.dedup();
    assert_eq!(ids.len(), 12);
}

#[test]
fn eval_reaches_full_accuracy_on_widely_separated_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(
        dir.path(),
        "d.csv",
        &["--n-per-class", "8", "--dims", "2,2,2", "--separation", "8"],
    );
    let report = dir.path().join("report.json");
    run_ok(&[
        "eval",
        "--data",
        data.to_str().unwrap(),
        "--folds",
        "2",
        "--q",
        "3",
        "--knn-k",
        "3",
        "--iterations",
        "80",
        "--episodes-per-iteration",
        "8",
        "--report",
        report.to_str().unwrap(),
    ]);
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(parsed["accuracy_mean"].as_f64().unwrap(), 1.0);
}

#[test]
fn zero_separation_stays_near_chance() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(
        dir.path(),
        "d.csv",
        &[
            "--n-per-class",
            "15",
            "--dims",
            "2,2,2",
            "--separation",
            "0",
        ],
    );
    let report = dir.path().join("report.json");
    run_ok(&[
        "eval",
        "--data",
        data.to_str().unwrap(),
        "--folds",
        "3",
        "--q",
        "3",
        "--knn-k",
        "3",
        "--iterations",
        "40",
        "--episodes-per-iteration",
        "8",
        "--report",
        report.to_str().unwrap(),
    ]);
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let acc = parsed["accuracy_mean"].as_f64().unwrap();
    assert!(
        (acc - 1.0 / 3.0).abs() < 0.25,
        "no-signal accuracy {acc} is far from chance"
    );
}

#[test]
fn infer_writes_one_prediction_per_query() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(
        dir.path(),
        "d.csv",
        &[
            "--n-per-class",
            "10",
            "--dims",
            "2,2,2",
            "--separation",
            "6",
        ],
    );
    let queries = synth(
        dir.path(),
        "q.csv",
        &[
            "--n-per-class",
            "3",
            "--dims",
            "2,2,2",
            "--separation",
            "6",
            "--seed",
            "9",
        ],
    );
    let model = dir.path().join("m.json");
    run_ok(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--iterations",
        "60",
        "--q",
        "3",
        "--knn-k",
        "3",
        "--episodes-per-iteration",
        "8",
        "--out",
        model.to_str().unwrap(),
    ]);
    let preds = dir.path().join("preds.csv");
    run_ok(&[
        "infer",
        "--data",
        data.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--queries",
        queries.to_str().unwrap(),
        "--q",
        "3",
        "--knn-k",
        "3",
        "--out",
        preds.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&preds).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "subject_id,predicted,p_CN,p_MCI,p_AD");
    assert_eq!(lines.len(), 10);
    for line in &lines[1..] {
        let cells: Vec<&str> = line.split(',').collect();
        assert!(["CN", "MCI", "AD"].contains(&cells[1]));
        let sum: f64 = cells[2..].iter().map(|c| c.parse::<f64>().unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }
}

#[test]
fn explain_writes_gating_and_attention_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(
        dir.path(),
        "d.csv",
        &["--n-per-class", "8", "--dims", "2,2,2"],
    );
    let model = dir.path().join("m.json");
    run_ok(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--iterations",
        "5",
        "--q",
        "3",
        "--knn-k",
        "3",
        "--episodes-per-iteration",
        "4",
        "--out",
        model.to_str().unwrap(),
    ]);
    let out_dir = dir.path().join("explain");
    run_ok(&[
        "explain",
        "--data",
        data.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--episodes",
        "4",
        "--q",
        "3",
        "--knn-k",
        "3",
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--dump-graphs",
    ]);
    let gating = std::fs::read_to_string(out_dir.join("gating.csv")).unwrap();
    assert_eq!(gating.lines().count(), 1 + 4 * 2);
    assert!(gating.starts_with("episode,layer,gamma_rf,gamma_cog,gamma_mri"));
    for e in 0..4 {
        assert!(out_dir.join(format!("episode_{e}_attention.json")).exists());
        let txt =
            std::fs::read_to_string(out_dir.join(format!("episode_{e}_attention.txt"))).unwrap();
        let first = txt.lines().next().unwrap();
        // relation layer src dst alpha with 6-decimal alpha
        let cells: Vec<&str> = first.split(' ').collect();
        assert_eq!(cells.len(), 5);
        assert_eq!(cells[4].split('.').nth(1).unwrap().len(), 6);
        assert!(out_dir.join(format!("episode_{e}_graphs.txt")).exists());
    }
}

#[test]
fn unknown_flags_and_schema_errors_exit_2() {
    let out = run(&["synth", "--no-such-flag", "1", "--out", "/tmp/x.csv"]);
    assert_eq!(out.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "subject_id,label,rf_0,cog_0\ns1,CN,1,2\n").unwrap();
    let out = run(&[
        "train",
        "--data",
        bad.to_str().unwrap(),
        "--iterations",
        "1",
        "--out",
        dir.path().join("m.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // 7-node episodes with d_mri = 8 and lambda = 0: the sample
    // second-moment matrix is rank-deficient, so Cholesky must fail.
    let data = synth(
        dir.path(),
        "d.csv",
        &["--n-per-class", "6", "--dims", "1,1,8"],
    );
    let out = run(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--iterations",
        "1",
        "--q",
        "2",
        "--knn-k",
        "2",
        "--lambda",
        "0",
        "--out",
        dir.path().join("m.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("positive-definite"));
}

#[test]
fn help_documents_every_config_key_with_defaults() {
    let text = run_ok(&["train", "--help"]);
    for (key, default) in [
        ("--q", "[10]"),
        ("--episodes-per-iteration", "[32]"),
        ("--iterations", "[1200]"),
        ("--knn-k", "[6]"),
        ("--tau", "[1.0]"),
        ("--learning-rate", "[0.01]"),
        ("--dropout", "[0.2]"),
        ("--focal-gamma", "[2.0]"),
        ("--lambda", "[0.85]"),
        ("--seed", "[42]"),
        ("--label-channel", "[true]"),
        ("--folds", "[5]"),
        ("--infer-ensemble", "[5]"),
        ("--optimizer", "[adam]"),
        ("--copula-scope", "[episode]"),
        ("--fallback", "[on]"),
        ("--head-dim-1", "[16]"),
        ("--heads-1", "[4]"),
        ("--head-dim-2", "[32]"),
        ("--heads-2", "[2]"),
        ("--classifier-hidden", "[32]"),
        ("--config", ""),
        ("--threads", ""),
    ] {
        assert!(text.contains(key), "--help is missing {key}");
        if !default.is_empty() {
            assert!(
                text.contains(default),
                "--help is missing default {default} for {key}"
            );
        }
    }
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(
        dir.path(),
        "d.csv",
        &["--n-per-class", "6", "--dims", "1,1,1"],
    );
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "iterations = 2\nq = 2\nknn_k = 2\n").unwrap();
    // Flag says 50 iterations; the file wins with 2.
    let stdout = run_ok(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--iterations",
        "50",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("m.json").to_str().unwrap(),
    ]);
    assert!(stdout.contains("iterations = 2"), "{stdout}");
    assert!(stdout.contains("final iteration 1"), "{stdout}");
}

#[test]
fn class_filter_produces_binary_reports() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(
        dir.path(),
        "d.csv",
        &["--n-per-class", "8", "--dims", "2,2,2", "--separation", "6"],
    );
    let report = dir.path().join("report.json");
    run_ok(&[
        "eval",
        "--data",
        data.to_str().unwrap(),
        "--folds",
        "2",
        "--classes",
        "CN,AD",
        "--q",
        "3",
        "--knn-k",
        "3",
        "--iterations",
        "30",
        "--episodes-per-iteration",
        "6",
        "--report",
        report.to_str().unwrap(),
    ]);
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let fold0 = &parsed["folds"][0]["report"];
    assert_eq!(fold0["class_names"], serde_json::json!(["CN", "AD"]));
    assert_eq!(fold0["deeproc"].as_array().unwrap().len(), 1);
    assert_eq!(fold0["deeproc"][0]["task"], "CN_vs_AD");
}
