use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn ssv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssv"))
        .args(args)
        .current_dir(fixtures())
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

const REPLAY: [&str; 4] = ["--provider", "replay", "--transcripts", "dataset/transcripts.json"];

#[test]
fn verify_reports_the_failing_example() {
    let out = ssv(&[
        "verify",
        "--program",
        "technicians_exists.ssv",
        "--instantiations",
        "technicians_c3_instantiations.json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["status"], "fail");
    assert_eq!(v["reason"], "NegSat");
    assert_eq!(v["failing"]["constraint"], 2);

    let out = ssv(&[
        "verify",
        "--program",
        "technicians.ssv",
        "--instantiations",
        "technicians_c3_instantiations.json",
        "--well-formed",
    ]);
    let v = json(&out);
    assert_eq!(v["outcome"]["status"], "pass");
    assert_eq!(v["wellFormed"]["ok"], true);
    assert_eq!(v["answer"], "C");
}

#[test]
fn oracle_counts_and_answers() {
    let v = json(&ssv(&["oracle", "--program", "technicians.ssv", "--count"]));
    assert_eq!(v["models"], 24);
    assert_eq!(v["perOption"]["C"], 6);
    let v = json(&ssv(&["oracle", "--program", "technicians.ssv"]));
    assert_eq!(v["answer"], "C");
    let v = json(&ssv(&["oracle", "--program", "meals.ssv"]));
    assert_eq!(v["answer"], Value::Null);
}

#[test]
fn run_replays_a_task() {
    let mut args = vec!["run", "--task", "dataset/tasks.jsonl", "--id", "tech-repair"];
    args.extend(REPLAY);
    let out = ssv(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["answer"], "C");
    assert_eq!(v["verified"], true);
    assert_eq!(v["trace"]["repairsUsed"], 1);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"max_repairs": 2, "temperatures": [0.0]}"#).unwrap();
    let config = config.to_str().unwrap();
    let mut args = vec!["run", "--task", "dataset/tasks.jsonl", "--id", "tech-repair", "--config", config];
    args.extend(REPLAY);
    assert_eq!(json(&ssv(&args))["verified"], true);
    // Without repairs the flawed program admits several options.
    args.extend(["--max-repairs", "0"]);
    let v = json(&ssv(&args));
    assert_eq!(v["verified"], false);
    assert_eq!(v["answer"], Value::Null);
}

#[test]
fn usage_and_config_errors_exit_with_2() {
    assert_eq!(ssv(&["run"]).status.code(), Some(2));
    assert_eq!(ssv(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(ssv(&["run", "--task", "dataset/tasks.jsonl", "--unknown-flag"]).status.code(), Some(2));
    // Several tasks and no id.
    let mut args = vec!["run", "--task", "dataset/tasks.jsonl"];
    args.extend(REPLAY);
    assert_eq!(ssv(&args).status.code(), Some(2));
    // Replay without a store.
    assert_eq!(ssv(&["run", "--task", "dataset/tasks.jsonl", "--id", "lamps"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"max_repairz": 2}"#).unwrap();
    let out = ssv(&["run", "--task", "dataset/tasks.jsonl", "--id", "lamps", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_repairz"));
    assert_eq!(ssv(&["oracle", "--program", "missing.ssv"]).status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_with_1() {
    let out = ssv(&[
        "verify",
        "--program",
        "technicians.ssv",
        "--instantiations",
        "technicians_c3_instantiations.json",
        "--solver-cmd",
        "no-such-solver-binary",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn eval_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let mut args = vec![
        "eval",
        "--dataset",
        "dataset/tasks.jsonl",
        "--out",
        out_dir.to_str().unwrap(),
        "--ablate",
        "dataset/ablation.json",
        "--no-timing",
        "--parallelism",
        "4",
    ];
    args.extend(REPLAY);
    let out = ssv(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(out_dir.join("report.json")).unwrap();
    let golden = std::fs::read_to_string(fixtures().join("dataset/golden_report.json")).unwrap();
    assert_eq!(report, golden);
    let csv = std::fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 13);
    let cells: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("ablation.json")).unwrap()).unwrap();
    assert_eq!(cells.as_array().unwrap().len(), 6);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("80.0 / 80.0 / 87.5"));
}

#[test]
fn help_lists_every_flag() {
    let out = ssv(&["eval", "--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for flag in [
        "--config",
        "--parallelism",
        "--log-level",
        "--solver-cmd",
        "--check-timeout-ms",
        "--provider",
        "--transcripts",
        "--model",
        "--endpoint",
        "--dataset",
        "--out",
        "--ablate",
    ] {
        assert!(text.contains(flag), "{flag} missing from help");
    }
}

#[test]
fn run_accepts_a_bare_task_object() {
    let line = std::fs::read_to_string(fixtures().join("dataset/tasks.jsonl"))
        .unwrap()
        .lines()
        .find(|l| l.contains("\"committee\""))
        .unwrap()
        .to_string();
    let pretty = serde_json::to_string_pretty(&serde_json::from_str::<Value>(&line).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("task.json");
    std::fs::write(&path, pretty).unwrap();
    let mut args = vec!["run", "--task", path.to_str().unwrap()];
    args.extend(REPLAY);
    let v = json(&ssv(&args));
    assert_eq!(v["answer"], "B");
    assert_eq!(v["trace"]["temperatureUsed"], 0.3);
}
