use std::path::Path;
use std::process::Command;

use evjoint::cli::{run, EXIT_DATA, EXIT_OK, EXIT_USAGE};
use evjoint::corpus::load_corpus;
use evjoint::schema::LabelSchema;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_evjoint"))
}

fn cli(args: &[&str]) -> i32 {
    run(std::iter::once("evjoint").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn unknown_flag_exits_with_usage() {
    let out = bin().args(["evaluate", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(cli(&["frobnicate"]), EXIT_USAGE);
    assert_eq!(cli(&["--help"]), EXIT_OK);
}

#[test]
fn missing_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let gold = dir.path().join("absent.jsonl");
    let out = bin().args(["evaluate", "--gold", p(&gold), "--pred", p(&gold)]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_DATA));
    assert!(!out.stderr.is_empty());
}

#[test]
fn evaluate_gold_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(&["gen-synth", "--seed", "3", "--sizes", "0,0,8", "--out", p(dir.path())]), EXIT_OK);
    let test = dir.path().join("test.jsonl");
    let report = dir.path().join("report.json");
    assert_eq!(cli(&["evaluate", "--gold", p(&test), "--pred", p(&test), "--report", p(&report)]), EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    for task in ["trigger_identification", "trigger_classification", "argument_identification", "argument_role_classification", "entity_extraction"] {
        assert_eq!(v[task]["f1"], 1.0, "{task}");
    }
}

#[test]
fn bad_sizes_are_a_usage_error() {
    assert_eq!(cli(&["gen-synth", "--sizes", "1,2"]), EXIT_USAGE);
}

#[test]
fn full_loop_runs_green() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(cli(&["gen-synth", "--seed", "11", "--sizes", "30,0,6", "--out", p(d)]), EXIT_OK);
    let config = d.join("config.json");
    std::fs::write(&config, r#"{"features": {"hash_bits": 12}, "folds": 3, "fold_max_iters": 20, "lbfgs": {"max_iters": 60}}"#).unwrap();
    let bundle = d.join("model.bin");
    let report = d.join("train.json");
    let train = d.join("train.jsonl");
    let test = d.join("test.jsonl");
    assert_eq!(
        cli(&["train", "--corpus", p(&train), "--config", p(&config), "--out", p(&bundle), "--report", p(&report)]),
        EXIT_OK
    );
    assert!(bundle.exists() && report.exists());

    let pred = d.join("pred.jsonl");
    assert_eq!(cli(&["predict", "--bundle", p(&bundle), "--corpus", p(&test), "--out", p(&pred)]), EXIT_OK);
    let schema = LabelSchema::bundled();
    let docs = load_corpus(&pred, &schema).unwrap();
    assert_eq!(docs.len(), 6);
    for doc in &docs {
        doc.validate(&schema).unwrap();
    }
    let status = std::fs::read_to_string(d.join("pred.jsonl.status.tsv")).unwrap();
    let lines: Vec<&str> = status.lines().collect();
    assert_eq!(lines[0], "doc_id\tstatus\titerations\tprimal\tdual");
    assert_eq!(lines.len(), 7);

    let eval = d.join("eval.json");
    assert_eq!(cli(&["evaluate", "--gold", p(&test), "--pred", p(&pred), "--report", p(&eval)]), EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&eval).unwrap()).unwrap();
    assert!(v["trigger_classification"]["f1"].as_f64().unwrap() > 0.0);

    let trace = d.join("trace.tsv");
    let id = docs[0].doc_id.clone();
    assert_eq!(
        cli(&["decode-trace", "--bundle", p(&bundle), "--corpus", p(&test), "--doc", &id, "--out", p(&trace)]),
        EXIT_OK
    );
    let trace = std::fs::read_to_string(&trace).unwrap();
    assert!(trace.starts_with("iter\tdual\tbest_dual\tprimal_residual\tdual_residual\teta\n"));
    assert!(trace.lines().count() >= 2);
    assert_eq!(cli(&["decode-trace", "--bundle", p(&bundle), "--corpus", p(&test), "--doc", "nope"]), EXIT_DATA);

    // A corpus is not a bundle.
    assert_eq!(cli(&["predict", "--bundle", p(&test), "--corpus", p(&test), "--out", p(&pred)]), EXIT_DATA);
}

#[test]
fn check_gradients_passes_for_each_model() {
    for model in ["crf", "within", "pair"] {
        assert_eq!(cli(&["check-gradients", "--model", model, "--docs", "4", "--bits", "8", "--coords", "60"]), EXIT_OK, "{model}");
    }
}
