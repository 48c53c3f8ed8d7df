//! Read-only views over run artifacts: memory pools, cognition snapshots
//! and recomputed reports.

use std::path::Path;

use cogloop_core::cognition::CognitionStore;
use cogloop_core::emo::MemoryPool;

use crate::metrics::compute_metrics;
use crate::report::{aggregate, Report, TaskRow};
use crate::suite::{read_logs, REPORT_FILE};
use crate::{read, write, ConfigError, HarnessError};

pub fn load_pool(path: &Path) -> Result<MemoryPool, HarnessError> {
    Ok(MemoryPool::from_snapshot(&read(path)?)?)
}

/// Every step with its summary and raw record, then every episode.
pub fn memory_dump(pool: &MemoryPool) -> String {
    let mut out = Vec::new();
    for record in pool.records() {
        let summary = pool.summary(record.step_index).map(|s| s.summary_text.as_str()).unwrap_or("");
        out.push(format!("== step {} ({} tokens raw)", record.step_index, record.raw_tokens));
        out.push(format!("summary: {summary}"));
        out.push(record.raw_text.clone());
    }
    for e in pool.episodes() {
        out.push(format!(
            "== episode {} covering steps {}-{} ({} tokens)",
            e.episode_id, e.first_step, e.last_step, e.episode_tokens
        ));
        out.push(e.text.clone());
    }
    out.join("\n")
}

pub fn memory_stats(pool: &MemoryPool) -> String {
    let s = pool.stats();
    format!(
        "steps {}\nepisodes {}\nraw tokens {}\nsummary tokens {}\nepisode tokens {}",
        s.steps, s.episodes, s.raw_tokens, s.summary_tokens, s.episode_tokens
    )
}

pub fn load_store(path: &Path) -> Result<CognitionStore, HarnessError> {
    Ok(CognitionStore::import_snapshot(&read(path)?)?)
}

/// Copies a snapshot after checking it replays to the state it claims.
pub fn copy_store(from: &Path, to: &Path) -> Result<u64, HarnessError> {
    let store = load_store(from)?;
    let replayed = CognitionStore::replay(store.seed().clone(), store.revisions())?;
    if replayed.state_bytes() != store.state_bytes() {
        return Err(HarnessError::Invalid(format!("{} does not replay to its own state", from.display())));
    }
    write(to, &store.export_snapshot())?;
    Ok(store.version())
}

/// Rebuilds a run's report rows from its logs and checks the stored
/// aggregates against them.
pub fn recompute_report(run_dir: &Path) -> Result<Report, HarnessError> {
    let path = run_dir.join(REPORT_FILE);
    let mut report: Report = serde_json::from_slice(&read(&path)?).map_err(|e| ConfigError::parse(&path, e))?;
    let logs = read_logs(run_dir)?;
    let rows: Vec<TaskRow> = logs
        .iter()
        .map(|t| {
            let goal = report.rows.iter().find(|r| r.task_id == t.task.task_id).and_then(|r| r.env_goal_reached);
            TaskRow::new(t, goal)
        })
        .collect();
    let metrics = aggregate(&rows);
    debug_assert_eq!(metrics.tasks, compute_metrics(&logs).tasks);
    if metrics != report.metrics {
        return Err(HarnessError::Invalid(format!(
            "{}: stored aggregates differ from the logs",
            path.display()
        )));
    }
    report.rows = rows;
    Ok(report)
}
