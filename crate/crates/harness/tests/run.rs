mod support;

use cogloop_core::model::FinalStatus;
use cogloop_harness::inspect::recompute_report;
use cogloop_harness::metrics::compute_metrics;
use cogloop_harness::suite::{execute_suite, read_logs, run, Manifest};
use cogloop_harness::HarnessConfig;
use sha2::{Digest, Sha256};
use support::suite;

#[test]
fn qa_suite_matches_hand_trace() {
    // qa-1 looks up Paris, qa-2 computes 51, qa-3 misses the table and
    // answers "unknown" against gold "Everest".
    let suite = suite("qa_suite");
    let dir = tempfile::tempdir().unwrap();
    let run = run(dir.path(), &suite, &suite.seed_store()).unwrap();
    let statuses: Vec<(String, FinalStatus)> =
        run.report.rows.iter().map(|r| (r.task_id.clone(), r.final_status)).collect();
    assert_eq!(
        statuses,
        vec![
            ("qa-1".to_string(), FinalStatus::Solved),
            ("qa-2".to_string(), FinalStatus::Solved),
            ("qa-3".to_string(), FinalStatus::Failed),
        ]
    );
    assert_eq!(run.report.metrics.success_rate, 2.0 / 3.0);
    assert_eq!(run.report.metrics.avg_steps, 2.0);
    assert_eq!(run.report.metrics.path_similarity, Some(1.0));
    assert_eq!(read_logs(dir.path()).unwrap().len(), 3);
}

#[test]
fn manifest_hashes_every_file() {
    let suite = suite("qa_suite");
    let dir = tempfile::tempdir().unwrap();
    run(dir.path(), &suite, &suite.seed_store()).unwrap();
    let manifest = Manifest::load(dir.path()).unwrap();
    assert_eq!(manifest.files.len(), 5 + 2 * 3);
    for (rel, hash) in &manifest.files {
        let bytes = std::fs::read(dir.path().join(rel)).unwrap();
        let expected: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(&expected, hash, "{rel}");
    }
}

#[test]
fn report_aggregates_recompute_from_logs() {
    for name in support::FIXTURES {
        let suite = suite(name);
        let dir = tempfile::tempdir().unwrap();
        let run = run(dir.path(), &suite, &suite.seed_store()).unwrap();
        let recomputed = recompute_report(dir.path()).unwrap();
        assert_eq!(recomputed.metrics, run.report.metrics, "{name}");
        let from_logs = compute_metrics(&run.trajectories());
        assert_eq!(from_logs.success_rate, run.report.metrics.success_rate, "{name}");
        assert_eq!(from_logs.prompt_tokens_total, run.report.metrics.prompt_tokens_total, "{name}");
    }
}

#[test]
fn parallel_workers_do_not_change_output() {
    let mut suite = suite("two_tools");
    let serial = execute_suite(&suite, &suite.seed_store()).unwrap();
    suite.config.parallel_workers = 4;
    let parallel = execute_suite(&suite, &suite.seed_store()).unwrap();
    assert_eq!(serial.report.rows, parallel.report.rows);
    assert_eq!(serial.trajectories(), parallel.trajectories());
}

#[test]
fn step_caps() {
    let suite = suite("cap");
    let run = execute_suite(&suite, &suite.seed_store()).unwrap();
    let by_id = |id: &str| run.report.rows.iter().find(|r| r.task_id == id).unwrap().clone();
    let standard = by_id("cap-standard");
    let embodied = by_id("cap-embodied");
    assert_eq!((standard.steps, standard.final_status), (5, FinalStatus::CapHit));
    assert_eq!((embodied.steps, embodied.final_status), (50, FinalStatus::CapHit));
}

#[test]
fn embodied_cap_is_configurable() {
    let mut suite = suite("cap");
    suite.config.embodied_max_steps = 12;
    suite.config.max_steps = 3;
    let run = execute_suite(&suite, &suite.seed_store()).unwrap();
    let steps: Vec<usize> = run.report.rows.iter().map(|r| r.steps).collect();
    assert_eq!(steps, vec![12, 3]);
}

#[test]
fn minienv_reference_policy() {
    let suite = suite("minienv");
    let run = execute_suite(&suite, &suite.seed_store()).unwrap();
    let row = &run.report.rows[0];
    assert_eq!(row.final_status, FinalStatus::Solved);
    assert_eq!(row.env_goal_reached, Some(true));
    assert_eq!(row.path_similarity, Some(1.0));
    assert!(row.steps <= 50);
}

#[test]
fn delegation_returns_nested_answer() {
    let suite = suite("delegation");
    let run = execute_suite(&suite, &suite.seed_store()).unwrap();
    assert_eq!(run.report.metrics.success_rate, 1.0);
    let delegated = &run.runs[0].trajectory.records[0];
    assert_eq!(delegated.outcome.payload, "42");
}

#[test]
fn config_hash_tracks_config() {
    let a = suite("qa_suite");
    let mut b = a.clone();
    b.config = HarnessConfig { temperature: 0.1, ..b.config };
    assert_eq!(a.inputs_hash(), b.inputs_hash());
    assert_ne!(a.config_hash(), b.config_hash());
}
