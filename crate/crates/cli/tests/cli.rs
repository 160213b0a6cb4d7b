use std::path::Path;
use std::process::{Command, Output};

use adforge_core::eval::{read_rank_shares, read_report, read_report_csv, RANK_SHARES_CSV, REPORT_CSV, REPORT_JSON};

fn adforge(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adforge"))
        .current_dir(dir)
        .env_remove("ADFORGE_MODELS_DIR")
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn unknown_flag_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(adforge(dir.path(), &["synth", "--bogus"]).status.code(), Some(2));
    assert_eq!(adforge(dir.path(), &["no-such-command"]).status.code(), Some(2));
    assert_eq!(adforge(dir.path(), &["extract"]).status.code(), Some(2));
}

#[test]
fn domain_error_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = adforge(dir.path(), &["eval", "--corpus", "missing.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.jsonl"));
}

#[test]
fn synth_twice_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["synth", "--queries", "50", "--ads-per-query", "6", "--seed", "7"];
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    std::fs::create_dir_all(&a).unwrap();
    std::fs::create_dir_all(&b).unwrap();
    assert!(adforge(&a, &args).status.success());
    assert!(adforge(&b, &args).status.success());
    for f in ["corpus.jsonl", "pages.jsonl"] {
        let x = std::fs::read(a.join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let lines = std::fs::read_to_string(a.join("corpus.jsonl")).unwrap().lines().count();
    assert_eq!(lines, 300);
}

#[test]
fn eval_writes_parseable_reports() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), r#"{"eval": {"ranker": {"n_trees": 40}}}"#).unwrap();
    assert!(adforge(dir.path(), &["synth", "--queries", "20", "--seed", "3"]).status.success());
    std::fs::rename(dir.path().join("corpus.jsonl"), dir.path().join("c.jsonl")).unwrap();
    let out = adforge(dir.path(), &["--config", "cfg.json", "eval", "--corpus", "c.jsonl"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let report_dir = dir.path().join("report");
    let report = read_report(report_dir.join(REPORT_JSON)).unwrap();
    assert_eq!(report.n_queries, 20);
    assert!(!read_report_csv(report_dir.join(REPORT_CSV)).unwrap().is_empty());
    assert!(!read_rank_shares(report_dir.join(RANK_SHARES_CSV)).unwrap().is_empty());
}

#[test]
fn analyze_text_trains_affect_once() {
    let dir = tempfile::tempdir().unwrap();
    let out = adforge(
        dir.path(),
        &["--models-dir", "m", "analyze", "--text", "Science diet coupons - Up to 60% Off Now"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["effects"].as_array().unwrap().iter().any(|e| e == "petty_advantage"));
    let a = v["arousal"].as_f64().unwrap();
    assert!((-2.0..=2.0).contains(&a));
    assert!(dir.path().join("m/affect.json").exists());
}

#[test]
fn models_dir_from_env() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_adforge"))
        .current_dir(dir.path())
        .env("ADFORGE_MODELS_DIR", "envmodels")
        .args(["analyze", "--text", "Browse now."])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("envmodels/affect.json").exists());
}

#[test]
fn translate_without_model_is_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = adforge(dir.path(), &["translate", "--text", "Dry cough help.", "--domain", "MS"]);
    assert_eq!(out.status.code(), Some(1));
}
