use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use warnpath::fixtures::{FIG1_FILE, FIG1_SOURCE, FIG1_WARNINGS};

const SMALL_MODEL: [&str; 10] = ["--d-model", "16", "--heads", "2", "--d-ff", "32", "--layers", "1", "--epochs", "4"];

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_warnpath"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn fig1_dir() -> TempDir {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join(FIG1_FILE), FIG1_SOURCE).unwrap();
    fs::write(tmp.path().join("warnings.jsonl"), FIG1_WARNINGS).unwrap();
    tmp
}

/// Generated corpus extracted to `<name>.jsonl`.
fn generated(dir: &Path, name: &str, pairs: usize, seed: u64) {
    ok(dir, &["gen-corpus", "--pairs", &pairs.to_string(), "--seed", &seed.to_string(), "-o", name]);
    let warnings = format!("{name}/warnings.jsonl");
    let out = format!("{name}.jsonl");
    ok(dir, &["extract", "--sources", name, "--warnings", &warnings, "-o", &out, "--project", name]);
}

#[test]
fn extract_fig1() {
    let tmp = fig1_dir();
    let d = tmp.path();
    ok(d, &["extract", "--sources", ".", "--warnings", "warnings.jsonl", "-o", "out.jsonl", "--emit-cfg", "dot"]);
    let rows = jsonl(&d.join("out.jsonl"));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["id"], "fig1-bad");
    assert_eq!(rows[0]["label"], 1);
    assert_eq!(rows[0]["tokens"][9], "InclusiveAnd");
    assert_eq!(rows[0]["tokens"].as_array().unwrap().len(), 13);
    assert_eq!(rows[1]["tokens"][9], "LogicalAnd");
    assert!(jsonl(&d.join("out.jsonl.errors.jsonl")).is_empty());
    let dot = fs::read_to_string(d.join("dot/fig1.c.bad.dot")).unwrap();
    assert!(dot.starts_with("digraph"));
}

#[test]
fn extract_failures() {
    let tmp = fig1_dir();
    let d = tmp.path();
    let mut lines: Vec<String> = FIG1_WARNINGS.lines().map(str::to_string).collect();
    lines[1] = lines[1].replace("\"line\": 10", "\"line\": 40");
    fs::write(d.join("partial.jsonl"), lines.join("\n")).unwrap();
    ok(d, &["extract", "--sources", ".", "--warnings", "partial.jsonl", "-o", "out.jsonl"]);
    assert_eq!(jsonl(&d.join("out.jsonl")).len(), 1);
    let errors = jsonl(&d.join("out.jsonl.errors.jsonl"));
    assert_eq!(errors.len(), 1);
    assert_eq!(errors[0]["id"], "fig1-good");
    assert_eq!(errors[0]["stage"], "anchor");

    fs::write(d.join("empty.jsonl"), "").unwrap();
    let out = run(d, &["extract", "--sources", ".", "--warnings", "empty.jsonl", "-o", "out.jsonl"]);
    assert_eq!(code(&out), 3);

    fs::write(d.join(FIG1_FILE), "void bad( {").unwrap();
    let out = run(d, &["extract", "--sources", ".", "--warnings", "warnings.jsonl", "-o", "out.jsonl"]);
    assert_eq!(code(&out), 2);

    fs::write(d.join("broken.jsonl"), "{not json").unwrap();
    let out = run(d, &["extract", "--sources", ".", "--warnings", "broken.jsonl", "-o", "out.jsonl"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn select_self_and_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(
        d.join("src.jsonl"),
        concat!(
            r#"{"id":"a","project":"p","label":1,"tokens":["X","Y","Y"]}"#,
            "\n",
            r#"{"id":"d","project":"p","label":1,"tokens":["X","Y"]}"#,
            "\n",
            r#"{"id":"b","project":"p","label":0,"tokens":["Z","W"]}"#,
            "\n",
            r#"{"id":"c","project":"p","label":0,"tokens":["Z","Q"]}"#,
            "\n"
        ),
    )
    .unwrap();
    fs::write(d.join("tgt.jsonl"), r#"{"id":"t","project":"q","label":null,"tokens":["X","Y","Y"]}"#).unwrap();
    ok(d, &["select", "--source", "src.jsonl", "--target", "tgt.jsonl", "-n", "1", "-o", "out.jsonl"]);
    let rows = jsonl(&d.join("out.jsonl"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["id"], "a");

    // Self-selection: each instance's best match is itself.
    ok(d, &["select", "--source", "src.jsonl", "--target", "src.jsonl", "-n", "1", "-o", "self.jsonl"]);
    let ids: Vec<String> = jsonl(&d.join("self.jsonl")).iter().map(|r| r["id"].as_str().unwrap().to_string()).collect();
    assert!(ids.contains(&"a".to_string()));

    fs::write(d.join("unlabeled.jsonl"), r#"{"id":"u","project":"p","label":null,"tokens":["X"]}"#).unwrap();
    let out = run(d, &["select", "--source", "unlabeled.jsonl", "--target", "tgt.jsonl", "-o", "x.jsonl"]);
    assert_eq!(code(&out), 3);
    fs::write(d.join("none.jsonl"), "").unwrap();
    let out = run(d, &["select", "--source", "none.jsonl", "--target", "tgt.jsonl", "-o", "x.jsonl"]);
    assert_eq!(code(&out), 3);
    let out = run(d, &["select", "--source", "src.jsonl", "--target", "tgt.jsonl", "-o", "x.jsonl", "--k1", "-1"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn train_identify_evaluate() {
    let tmp = fig1_dir();
    let d = tmp.path();
    generated(d, "gen", 40, 3);
    ok(d, &["train", "--train", "gen.jsonl", "-o", "model.bin"]);
    let log: Value = serde_json::from_str(&fs::read_to_string(d.join("model.bin.log.json")).unwrap()).unwrap();
    assert!(log["best_epoch"].as_u64().unwrap() >= 1);

    ok(d, &["extract", "--sources", ".", "--warnings", "warnings.jsonl", "-o", "fig1.jsonl"]);
    ok(d, &["identify", "--model", "model.bin", "--target", "fig1.jsonl", "-o", "preds.jsonl"]);
    let preds = jsonl(&d.join("preds.jsonl"));
    assert_eq!(preds[0]["id"], "fig1-bad");
    assert_eq!(preds[0]["label"], 1);
    let (pc, pb) = (preds[0]["p_clean"].as_f64().unwrap(), preds[0]["p_buggy"].as_f64().unwrap());
    assert!((pc + pb - 1.0).abs() < 1e-12);

    let out = ok(d, &["evaluate", "--predictions", "preds.jsonl", "--labeled", "fig1.jsonl"]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["precision"], 1.0);
    assert_eq!(report["recall"], 1.0);

    fs::write(d.join("one.jsonl"), fs::read_to_string(d.join("fig1.jsonl")).unwrap().lines().next().unwrap()).unwrap();
    let out = run(d, &["evaluate", "--predictions", "preds.jsonl", "--labeled", "one.jsonl"]);
    assert_eq!(code(&out), 3);

    fs::write(d.join("empty.jsonl"), "").unwrap();
    ok(d, &["identify", "--model", "model.bin", "--target", "empty.jsonl", "-o", "none.jsonl"]);
    assert_eq!(fs::read(d.join("none.jsonl")).unwrap(), b"");

    let bytes = fs::read(d.join("model.bin")).unwrap();
    fs::write(d.join("short.bin"), &bytes[..bytes.len() - 8]).unwrap();
    let out = run(d, &["identify", "--model", "short.bin", "--target", "fig1.jsonl", "-o", "x.jsonl"]);
    assert_eq!(code(&out), 3);

    let text = String::from_utf8_lossy(&bytes).into_owned();
    let hash_line = text.lines().nth(1).unwrap().to_string();
    let mut other = bytes.clone();
    let at = bytes.windows(hash_line.len()).position(|w| w == hash_line.as_bytes()).unwrap();
    other[at + hash_line.len() - 1] ^= 1;
    fs::write(d.join("other.bin"), other).unwrap();
    let out = run(d, &["identify", "--model", "other.bin", "--target", "fig1.jsonl", "-o", "x.jsonl"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("vocabulary"));
}

#[test]
fn train_rejects_tiny_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let rows: Vec<String> = (0..5)
        .map(|i| format!(r#"{{"id":"i{i}","project":"p","label":{},"tokens":["Null"]}}"#, i % 2))
        .collect();
    fs::write(d.join("five.jsonl"), rows.join("\n")).unwrap();
    let out = run(d, &["train", "--train", "five.jsonl", "-o", "m.bin"]);
    assert_eq!(code(&out), 3);
    let out = run(d, &["train", "--train", "five.jsonl", "-o", "m.bin", "--heads", "5"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn crossval_and_stats() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    generated(d, "gen", 20, 4);
    let cv = [&["crossval", "--corpus", "gen.jsonl", "-o", "cv.csv", "--epochs", "1"][..], &SMALL_MODEL[..8]].concat();
    ok(d, &cv);
    let table = fs::read_to_string(d.join("cv.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "method,target_project,repeat,precision,recall");
    assert_eq!(lines.len(), 21);
    assert!(lines[20].starts_with("warnpath,gen,19,"));

    let out = ok(d, &["stats", "cv.csv", "cv.csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let precision = text.lines().find(|l| l.starts_with("precision")).unwrap();
    let fields: Vec<&str> = precision.split_whitespace().collect();
    assert_eq!(fields, ["precision", "1.000000", "0.000000", "N"]);
    assert!(text.contains("scott-knott precision: [1] warnpath (A), warnpath (B)\n"));

    fs::write(d.join("short.csv"), lines[..5].join("\n")).unwrap();
    let out = run(d, &["stats", "cv.csv", "short.csv"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(code(&run(d, &["frobnicate"])), 1);
    assert_eq!(code(&run(d, &["select", "--source", "x"])), 1);
    assert_eq!(code(&run(d, &["gen-corpus", "--pairs", "0", "-o", "g"])), 1);
    assert_eq!(code(&run(d, &["--help"])), 0);
    assert_eq!(code(&run(d, &["--version"])), 0);
    assert_eq!(code(&run(d, &["extract", "--sources", ".", "--warnings", "missing.jsonl", "-o", "o"])), 3);
}
