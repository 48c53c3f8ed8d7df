use serde::{Deserialize, Serialize};

use cogloop_core::emo::OverflowStats;
use cogloop_core::model::{FinalStatus, Trajectory};

use crate::metrics::{executed_path, path_similarity, Metrics};
use crate::HarnessConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRow {
    pub task_id: String,
    pub final_status: FinalStatus,
    pub final_answer: Option<String>,
    pub steps: usize,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_similarity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env_goal_reached: Option<bool>,
}

impl TaskRow {
    pub fn new(trajectory: &Trajectory, env_goal_reached: Option<bool>) -> Self {
        TaskRow {
            task_id: trajectory.task.task_id.clone(),
            final_status: trajectory.final_status,
            final_answer: trajectory.final_answer.clone(),
            steps: trajectory.len(),
            prompt_tokens: trajectory.usage.prompt_tokens,
            completion_tokens: trajectory.usage.completion_tokens,
            path_similarity: trajectory
                .task
                .reference_path
                .as_ref()
                .map(|r| path_similarity(&executed_path(trajectory), r)),
            env_goal_reached,
        }
    }
}

/// Aggregates recomputed from rows alone.
pub fn aggregate(rows: &[TaskRow]) -> Metrics {
    let n = rows.len();
    if n == 0 {
        return Metrics::default();
    }
    let solved = rows.iter().filter(|r| r.final_status == FinalStatus::Solved).count();
    let sims: Vec<f64> = rows.iter().filter_map(|r| r.path_similarity).collect();
    Metrics {
        tasks: n,
        success_rate: solved as f64 / n as f64,
        avg_steps: rows.iter().map(|r| r.steps).sum::<usize>() as f64 / n as f64,
        prompt_tokens_total: rows.iter().map(|r| r.prompt_tokens).sum(),
        completion_tokens_total: rows.iter().map(|r| r.completion_tokens).sum(),
        path_similarity: (!sims.is_empty()).then(|| sims.iter().sum::<f64>() / sims.len() as f64),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub config: HarnessConfig,
    /// Hash of the scenario, the task file and the seed; equal across the
    /// arms of an ablation.
    pub inputs_hash: String,
    pub config_hash: String,
    pub store_version: u64,
    pub rows: Vec<TaskRow>,
    pub metrics: Metrics,
    pub memory: OverflowStats,
}

impl Report {
    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("report serializes");
        out.push(b'\n');
        out
    }

    pub fn render(&self) -> String {
        let mut lines = vec![format!(
            "scenario {} | {} tasks | cognition v{}",
            self.scenario, self.metrics.tasks, self.store_version
        )];
        for row in &self.rows {
            let sim = row.path_similarity.map(|s| format!(" path {s:.3}")).unwrap_or_default();
            lines.push(format!(
                "  {:<24} {:<7} steps {:>3} tokens {:>7}/{:<6}{sim}",
                row.task_id,
                format!("{:?}", row.final_status),
                row.steps,
                row.prompt_tokens,
                row.completion_tokens
            ));
        }
        let m = &self.metrics;
        lines.push(format!(
            "success {:.3} | avg steps {:.2} | prompt tokens {} | completion tokens {}",
            m.success_rate, m.avg_steps, m.prompt_tokens_total, m.completion_tokens_total
        ));
        if let Some(sim) = m.path_similarity {
            lines.push(format!("path similarity {sim:.3}"));
        }
        lines.push(format!(
            "memory: {} assemblies, {} overflows, {} folds",
            self.memory.assemblies, self.memory.overflows, self.memory.folds
        ));
        lines.join("\n")
    }
}
