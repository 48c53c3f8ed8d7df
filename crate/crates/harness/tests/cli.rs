mod support;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use support::fixture;

fn cogloop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cogloop")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_replay_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let qa = fixture("qa_suite");
    let o = cogloop(&[
        "run",
        "--config",
        s(&qa.join("config.toml")),
        "--scenario",
        s(&qa.join("scenario.json")),
        "--tasks",
        s(&qa.join("tasks.jsonl")),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("success 0.667"));

    let o = cogloop(&["replay", s(&out.join("logs/qa-1.jsonl")), s(&out.join("logs/qa-3.jsonl"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).matches(": Match").count(), 2);

    let o = cogloop(&["report", s(&out), "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn diverged_replay_exits_non_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert!(cogloop(&["run", "--suite", s(&fixture("qa_suite")), "--out", s(&out)]).status.success());
    let log = out.join("logs/qa-2.jsonl");
    let text = fs::read_to_string(&log).unwrap().replacen("\"payload\":\"51\"", "\"payload\":\"52\"", 1);
    fs::write(&log, text).unwrap();
    let o = cogloop(&["replay", s(&log)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("Diverged at line 2"), "{}", stdout(&o));
}

#[test]
fn missing_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let qa = fixture("qa_suite");
    let config = dir.path().join("config.toml");
    fs::write(&config, "seed = 1\n").unwrap();
    let o = cogloop(&[
        "run",
        "--config",
        s(&config),
        "--scenario",
        s(&qa.join("scenario.json")),
        "--tasks",
        s(&qa.join("tasks.jsonl")),
        "--out",
        s(&dir.path().join("run")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("memory_budget"), "{}", stderr(&o));
}

#[test]
fn unsupported_ablation_mode() {
    let o = cogloop(&["ablate", "sideways", "--suite", s(&fixture("qa_suite"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unsupported ablation mode `sideways`"));
}

#[test]
fn evolve_memory_and_cognition_commands() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let evolved = dir.path().join("evolved");
    assert!(cogloop(&["run", "--suite", s(&fixture("two_tools")), "--out", s(&run)]).status.success());

    let o = cogloop(&["evolve", s(&run), "--out", s(&evolved)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("AdjustReliability"));

    let o = cogloop(&["memory", "stats", s(&run.join("pools/tt-00.jsonl"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("steps 2\n"), "{}", stdout(&o));
    let o = cogloop(&["memory", "dump", s(&run.join("pools/tt-00.jsonl"))]);
    assert!(stdout(&o).contains("== step 0"));

    let snapshot = dir.path().join("snap.jsonl");
    let o = cogloop(&["cognition", "export", s(&evolved), s(&snapshot)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = cogloop(&["cognition", "import", s(&snapshot), s(&run)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(&snapshot).unwrap(), fs::read(run.join("store.jsonl")).unwrap());

    // a corrupted snapshot is refused
    fs::write(&snapshot, "{}\n").unwrap();
    assert_eq!(cogloop(&["cognition", "import", s(&snapshot), s(&run)]).status.code(), Some(2));
}
