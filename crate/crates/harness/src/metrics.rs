//! Success rate, step counts, token totals and path similarity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use cogloop_core::model::{FinalStatus, Trajectory};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("task {0} has no reference path")]
    MissingReferencePath(String),
}

/// Length of the longest common subsequence.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// LCS of the executed and reference action names over the reference
/// length. An empty reference is matched trivially.
pub fn path_similarity(executed: &[String], reference: &[String]) -> f64 {
    if reference.is_empty() {
        return 1.0;
    }
    lcs_len(executed, reference) as f64 / reference.len() as f64
}

pub fn executed_path(trajectory: &Trajectory) -> Vec<String> {
    trajectory.records.iter().map(|r| r.kind.name()).collect()
}

pub fn trajectory_path_similarity(trajectory: &Trajectory) -> Result<f64, MetricsError> {
    let reference = trajectory
        .task
        .reference_path
        .as_ref()
        .ok_or_else(|| MetricsError::MissingReferencePath(trajectory.task.task_id.clone()))?;
    Ok(path_similarity(&executed_path(trajectory), reference))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tasks: usize,
    pub success_rate: f64,
    pub avg_steps: f64,
    pub prompt_tokens_total: u64,
    pub completion_tokens_total: u64,
    /// Mean over the tasks that carry a reference path.
    pub path_similarity: Option<f64>,
}

/// Aggregates over trajectories. Path similarity averages the tasks that
/// have a reference; it is `None` when none do.
pub fn compute_metrics(trajectories: &[Trajectory]) -> Metrics {
    let n = trajectories.len();
    if n == 0 {
        return Metrics::default();
    }
    let solved = trajectories.iter().filter(|t| t.final_status == FinalStatus::Solved).count();
    let steps: usize = trajectories.iter().map(|t| t.len()).sum();
    let sims: Vec<f64> = trajectories.iter().filter_map(|t| trajectory_path_similarity(t).ok()).collect();
    Metrics {
        tasks: n,
        success_rate: solved as f64 / n as f64,
        avg_steps: steps as f64 / n as f64,
        prompt_tokens_total: trajectories.iter().map(|t| t.usage.prompt_tokens).sum(),
        completion_tokens_total: trajectories.iter().map(|t| t.usage.completion_tokens).sum(),
        path_similarity: (!sims.is_empty()).then(|| sims.iter().sum::<f64>() / sims.len() as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn hand_computed_lcs() {
        assert_eq!(path_similarity(&names("a b c"), &names("a b c")), 1.0);
        assert_eq!(path_similarity(&names("a x b y c"), &names("a b c")), 1.0);
        assert!((path_similarity(&names("c b a"), &names("a b c")) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(path_similarity(&names(""), &names("a b")), 0.0);
        assert_eq!(lcs_len(&names("a b c b d a b"), &names("b d c a b a")), 4);
    }

    #[test]
    fn missing_reference() {
        let t = Trajectory::begin(
            cogloop_core::model::TaskSpec::new("t", "q"),
            Default::default(),
            0,
        );
        assert_eq!(
            trajectory_path_similarity(&t),
            Err(MetricsError::MissingReferencePath("t".into()))
        );
    }
}
