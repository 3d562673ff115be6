use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lmcurate"))
        .args(args)
        .current_dir(dir)
        .env_remove("LMCURATE_CONFIG")
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .expect("binary runs")
}

fn success(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(out.status.success(), "lmcurate {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

const DOCS: &str = r#"{"id":"a","lang":"en","source":"wiki","text":"The cat sat on the mat. 22 Birds + 3 birds = 25 birds."}
{"id":"b","lang":"en","source":"web","text":"A dog ran in the park, and the cat watched it."}
{"id":"c","lang":"de","source":"wiki","text":"Der Hund lief im Park, und die Katze sah zu."}
{"id":"d","lang":"en","source":"web","text":"The cat sat on the mat. 22 Birds + 3 birds = 25 birds."}
"#;

#[test]
fn tokenizer_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("docs.jsonl"), DOCS).unwrap();
    success(d, &["tok-train", "--corpus", "docs.jsonl", "--output", "tok", "--strategy", "case", "--vocab-size", "300"]);
    assert!(d.join("tok.manifest.json").exists());

    let text = "Zwei Katzen, 12 Birds + 3 = 15!\n";
    fs::write(d.join("in.txt"), text).unwrap();
    success(d, &["tok-encode", "--tokenizer", "tok", "--input", "in.txt", "--output", "ids.txt"]);
    let ids = fs::read_to_string(d.join("ids.txt")).unwrap();
    assert!(ids.ends_with('\n') && ids.split_whitespace().all(|s| s.parse::<u32>().is_ok()));
    success(d, &["tok-decode", "--tokenizer", "tok", "--input", "ids.txt", "--output", "back.txt"]);
    assert_eq!(fs::read_to_string(d.join("back.txt")).unwrap(), text);
}

#[test]
fn pipeline_reports_counts_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("docs.jsonl"), DOCS).unwrap();
    success(
        d,
        &["pipeline", "--corpus", "docs.jsonl", "--output", "kept.jsonl", "--report", "report.json", "--no-entropy", "--no-heuristics"],
    );
    let report = json(&d.join("report.json"));
    assert_eq!(report["command"], "pipeline");
    assert_eq!(report["result"]["input_docs"], 4);
    assert_eq!(report["result"]["kept_docs"], 3);
    assert_eq!(report["result"]["verdicts"]["drop_duplicate"], 1);

    let manifest = json(&d.join("kept.jsonl.manifest.json"));
    assert_eq!(manifest["command"], "pipeline");
    assert_eq!(manifest["timestamp"]["unix_seconds"], 1_700_000_000);
    assert_eq!(manifest["config_sha256"], report["config_sha256"]);
    let outputs = manifest["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 2);
    assert_eq!(manifest["inputs"][0]["path"], "docs.jsonl");
}

#[test]
fn config_errors_are_collected_and_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["pipeline", "--entropy-low", "0.9", "--entropy-high", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");
    let messages = err["error"]["messages"].as_array().unwrap();
    assert!(messages.len() >= 3, "{messages:?}");

    fs::write(dir.path().join("bad.toml"), "sede = 1\n").unwrap();
    let out = run(dir.path(), &["--config", "bad.toml", "carbon", "--energy-kwh", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("docs.jsonl"), "{not json}\n").unwrap();
    let out = run(dir.path(), &["pipeline", "--corpus", "docs.jsonl", "--output", "kept.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "runtime");
}

#[test]
fn flags_override_file_which_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("run.toml"), "seed = 5\n[carbon]\npue = 2.0\nenergy_kwh = 10.0\n").unwrap();

    success(d, &["carbon", "--energy-kwh", "10", "--output", "defaults.json"]);
    let r = json(&d.join("defaults.json"));
    assert_eq!(r["seed"], 0);
    assert_eq!(r["result"]["kg_co2"], 10.0 * 1.3 * 0.4);

    success(d, &["--config", "run.toml", "carbon", "--output", "file.json"]);
    let r = json(&d.join("file.json"));
    assert_eq!(r["seed"], 5);
    assert_eq!(r["result"]["kg_co2"], 10.0 * 2.0 * 0.4);

    success(d, &["--config", "run.toml", "--seed", "9", "carbon", "--pue", "1.0", "--output", "flags.json"]);
    let r = json(&d.join("flags.json"));
    assert_eq!(r["seed"], 9);
    assert_eq!(r["result"]["kg_co2"], 10.0 * 1.0 * 0.4);

    let out = Command::new(env!("CARGO_BIN_EXE_lmcurate"))
        .args(["carbon", "--output", "env.json"])
        .current_dir(d)
        .env("LMCURATE_CONFIG", d.join("run.toml"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(json(&d.join("env.json"))["seed"], 5);
}

#[test]
fn ngram_training_and_perplexity() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("docs.jsonl"), DOCS).unwrap();
    success(d, &["tok-train", "--corpus", "docs.jsonl", "--output", "tok", "--vocab-size", "300"]);
    success(d, &["lm-train", "--corpus", "docs.jsonl", "--tokenizer", "tok", "--output", "lm.json"]);
    success(d, &["ppl", "--corpus", "docs.jsonl", "--tokenizer", "tok", "--model", "lm.json", "--output", "ppl.json"]);
    let r = json(&d.join("ppl.json"));
    let langs = r["result"]["languages"].as_object().unwrap();
    assert_eq!(langs.len(), 2);
    for v in langs.values() {
        let p = v["perplexity"].as_f64().unwrap();
        assert!(p.is_finite() && p > 0.0);
    }
}

#[test]
fn chart_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("values.json"), r#"{"default": 6.94, "case": 8.13, "arithmetic": 7.99, "combined": 8.43, "char": 9.47}"#)
        .unwrap();
    success(d, &["chart", "--input", "values.json", "--output", "chart.svg", "--sort", "ascending", "--title", "Perplexity"]);
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/chart.svg");
    let got = fs::read_to_string(d.join("chart.svg")).unwrap();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&golden, &got).unwrap();
    }
    assert_eq!(got, fs::read_to_string(golden).unwrap());
}

#[test]
fn example_config_resolves_paths_against_its_directory() {
    let dir = tempfile::tempdir().unwrap();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/example.toml");
    success(dir.path(), &["--config", config.to_str().unwrap(), "stats", "--output", "stats.json"]);
    let r = json(&dir.path().join("stats.json"));
    assert_eq!(r["seed"], 20_220_415);
    let langs = r["result"]["languages"].as_object().unwrap();
    let docs: u64 = langs.values().flat_map(|l| l.as_object().unwrap().values()).map(|s| s["doc_count"].as_u64().unwrap()).sum();
    assert_eq!(docs, 570);
}
