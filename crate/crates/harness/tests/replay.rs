mod support;

use std::fs;
use std::path::Path;

use cogloop_harness::replay::{replay, ReplayVerdict};
use cogloop_harness::suite::run;
use cogloop_harness::HarnessError;
use support::suite;

fn fresh_run(name: &str, dir: &Path) {
    let suite = suite(name);
    run(dir, &suite, &suite.seed_store()).unwrap();
}

#[test]
fn untouched_logs_match() {
    for name in support::FIXTURES {
        let dir = tempfile::tempdir().unwrap();
        fresh_run(name, dir.path());
        for entry in fs::read_dir(dir.path().join("logs")).unwrap() {
            let log = entry.unwrap().path();
            assert_eq!(replay(&log, dir.path()).unwrap(), ReplayVerdict::Match, "{}", log.display());
        }
    }
}

#[test]
fn edited_payload_byte_diverges_at_that_line() {
    let dir = tempfile::tempdir().unwrap();
    fresh_run("qa_suite", dir.path());
    let log = dir.path().join("logs/qa-1.jsonl");
    let text = fs::read_to_string(&log).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    // line 2 is step 0; its payload is "Paris"
    lines[1] = lines[1].replacen("\"payload\":\"Paris\"", "\"payload\":\"Parks\"", 1);
    assert_ne!(lines[1], text.lines().nth(1).unwrap());
    fs::write(&log, lines.join("\n") + "\n").unwrap();
    match replay(&log, dir.path()).unwrap() {
        ReplayVerdict::Diverged { line, .. } => assert_eq!(line, 2),
        ReplayVerdict::Match => panic!("edited log replayed as a match"),
    }
}

#[test]
fn log_from_another_seed_diverges() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let suite_a = suite("two_tools");
    let mut suite_b = suite_a.clone();
    suite_b.config.seed += 1;
    run(a.path(), &suite_a, &suite_a.seed_store()).unwrap();
    run(b.path(), &suite_b, &suite_b.seed_store()).unwrap();
    let verdict = replay(&b.path().join("logs/tt-00.jsonl"), a.path()).unwrap();
    assert!(matches!(verdict, ReplayVerdict::Diverged { .. }), "{verdict:?}");
}

#[test]
fn malformed_header_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    fresh_run("qa_suite", dir.path());
    let log = dir.path().join("logs/qa-1.jsonl");
    fs::write(&log, "not json\n").unwrap();
    assert!(matches!(replay(&log, dir.path()), Err(HarnessError::MalformedLine { line: 1, .. })));
}

#[test]
fn replays_against_logged_cognition_version() {
    // the run dir's store moves on after evolution; logs still replay
    let dir = tempfile::tempdir().unwrap();
    fresh_run("two_tools", dir.path());
    let evolved = tempfile::tempdir().unwrap();
    cogloop_harness::evolve::evolve(dir.path(), evolved.path(), false).unwrap();
    fs::copy(evolved.path().join("store.jsonl"), dir.path().join("store.jsonl")).unwrap();
    let log = dir.path().join("logs/tt-07.jsonl");
    assert_eq!(replay(&log, dir.path()).unwrap(), ReplayVerdict::Match);
}
