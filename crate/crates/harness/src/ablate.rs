//! Paired runs that differ in one switch: memory orchestration on or off,
//! and cognition before or after one evolution cycle.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use cogloop_core::backend::{GenerationLimits, ScriptedBackend};
use cogloop_core::cognition::render_reliability;
use cogloop_core::evolution::{evolution_cycle, CycleReport};
use cogloop_core::model::{ActionKind, Trajectory};

use crate::report::Report;
use crate::suite::{execute_suite, write_run, Suite};
use crate::{write, ConfigError, HarnessError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    EmoOnOff,
    CognitionEvolution,
}

impl FromStr for AblationMode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "emo_on_off" => Ok(AblationMode::EmoOnOff),
            "cognition_evolution" => Ok(AblationMode::CognitionEvolution),
            other => Err(ConfigError::Unsupported {
                what: "ablation mode".into(),
                value: other.into(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub label: String,
    pub report: Report,
}

/// Which of the interchangeable tools the agent picked first in each task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolChoice {
    pub candidates: Vec<String>,
    pub stable_tool: String,
    pub before: BTreeMap<String, usize>,
    pub after: BTreeMap<String, usize>,
    pub stable_rate_before: f64,
    pub stable_rate_after: f64,
    /// Rendered reliability lines after evolution, per candidate.
    pub reliabilities: BTreeMap<String, Vec<String>>,
    pub estimates: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub mode: AblationMode,
    pub arms: Vec<Arm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolution: Option<CycleReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_choice: Option<ToolChoice>,
}

impl AblationReport {
    pub fn arm(&self, label: &str) -> Option<&Report> {
        self.arms.iter().find(|a| a.label == label).map(|a| &a.report)
    }

    pub fn render(&self) -> String {
        let mut lines = vec![format!("ablation {:?}", self.mode)];
        for arm in &self.arms {
            let m = &arm.report.metrics;
            lines.push(format!(
                "  {:<8} success {:.3} | prompt tokens {} | completion tokens {} | avg steps {:.2}",
                arm.label, m.success_rate, m.prompt_tokens_total, m.completion_tokens_total, m.avg_steps
            ));
        }
        if let [a, b] = self.arms.as_slice() {
            if b.report.metrics.prompt_tokens_total > 0 {
                lines.push(format!(
                    "  prompt token ratio {}/{}: {:.3}",
                    a.label,
                    b.label,
                    a.report.metrics.prompt_tokens_total as f64 / b.report.metrics.prompt_tokens_total as f64
                ));
            }
        }
        if let Some(c) = &self.tool_choice {
            lines.push(format!("  stable tool {}: {:.3} -> {:.3}", c.stable_tool, c.stable_rate_before, c.stable_rate_after));
            for (tool, rel) in &c.reliabilities {
                for line in rel {
                    lines.push(format!("  {tool}: {line}"));
                }
            }
        }
        lines.join("\n")
    }
}

fn check_inputs(arms: &[Arm]) -> Result<(), HarnessError> {
    let hashes: BTreeSet<&str> = arms.iter().map(|a| a.report.inputs_hash.as_str()).collect();
    if hashes.len() > 1 {
        return Err(HarnessError::Invalid("ablation arms ran on different inputs".into()));
    }
    Ok(())
}

/// Tools whose seed descriptions are identical to another tool's.
pub fn interchangeable_tools(suite: &Suite) -> Vec<String> {
    let mut by_description: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for tool in &suite.scenario.tools {
        by_description.entry(tool.description.as_str()).or_default().push(tool.name.clone());
    }
    let mut out: Vec<String> = by_description
        .into_iter()
        .filter(|(_, names)| names.len() >= 2)
        .flat_map(|(_, names)| names)
        .collect();
    out.sort();
    out
}

/// First call to any candidate tool in each trajectory.
pub fn first_choices(trajectories: &[Trajectory], candidates: &[String]) -> BTreeMap<String, usize> {
    let mut counts: BTreeMap<String, usize> = candidates.iter().map(|c| (c.clone(), 0)).collect();
    for t in trajectories {
        let first = t.records.iter().find_map(|r| match &r.kind {
            ActionKind::EmicToolCall(name) if candidates.contains(name) => Some(name.clone()),
            _ => None,
        });
        if let Some(name) = first {
            *counts.entry(name).or_default() += 1;
        }
    }
    counts
}

fn rate(counts: &BTreeMap<String, usize>, tool: &str) -> f64 {
    let total: usize = counts.values().sum();
    if total == 0 {
        0.0
    } else {
        counts.get(tool).copied().unwrap_or(0) as f64 / total as f64
    }
}

pub fn ablate(mode: AblationMode, suite: &Suite, out_dir: Option<&Path>) -> Result<AblationReport, HarnessError> {
    let report = match mode {
        AblationMode::EmoOnOff => {
            let mut arms = Vec::new();
            for (label, enabled) in [("emo", true), ("raw", false)] {
                let mut arm = suite.clone();
                arm.config.emo_enabled = enabled;
                let store = arm.seed_store();
                let run = execute_suite(&arm, &store)?;
                if let Some(dir) = out_dir {
                    write_run(&dir.join(label), &arm, &store, &run)?;
                }
                arms.push(Arm {
                    label: label.into(),
                    report: run.report,
                });
            }
            AblationReport {
                mode,
                arms,
                evolution: None,
                tool_choice: None,
            }
        }
        AblationMode::CognitionEvolution => {
            let mut store = suite.seed_store();
            let before = execute_suite(suite, &store)?;
            if let Some(dir) = out_dir {
                write_run(&dir.join("before"), suite, &store, &before)?;
            }
            let analyzer = ScriptedBackend::new(suite.scenario.script.clone());
            let limits = GenerationLimits {
                max_tokens: suite.config.max_generation_tokens,
                temperature: suite.config.temperature,
            };
            let cycle = evolution_cycle(&before.trajectories(), &mut store, Some(&analyzer), &suite.config.evolution, limits)?;
            let after = execute_suite(suite, &store)?;
            if let Some(dir) = out_dir {
                write_run(&dir.join("after"), suite, &store, &after)?;
            }

            let candidates = interchangeable_tools(suite);
            let failure = |name: &str| {
                suite.scenario.tools.iter().find(|t| t.name == name).map_or(0.0, |t| t.failure_probability)
            };
            let stable_tool = candidates
                .iter()
                .min_by(|a, b| failure(a).total_cmp(&failure(b)).then(a.cmp(b)))
                .cloned()
                .unwrap_or_default();
            let tags: BTreeSet<String> = suite.tasks.iter().flat_map(|t| t.reliability_tags()).collect();
            let mut reliabilities = BTreeMap::new();
            let mut estimates = BTreeMap::new();
            for name in &candidates {
                let table = store.state().tools.get(name).map(|p| p.reliability.clone()).unwrap_or_default();
                let lines = tags
                    .iter()
                    .map(|tag| render_reliability(&table.get(tag).copied().unwrap_or_default(), tag))
                    .collect();
                let mut pooled = cogloop_core::cognition::Reliability::default();
                for r in table.values() {
                    pooled.successes += r.successes;
                    pooled.attempts += r.attempts;
                }
                reliabilities.insert(name.clone(), lines);
                estimates.insert(name.clone(), pooled.estimate());
            }
            let before_counts = first_choices(&before.trajectories(), &candidates);
            let after_counts = first_choices(&after.trajectories(), &candidates);
            let tool_choice = ToolChoice {
                stable_rate_before: rate(&before_counts, &stable_tool),
                stable_rate_after: rate(&after_counts, &stable_tool),
                candidates,
                stable_tool,
                before: before_counts,
                after: after_counts,
                reliabilities,
                estimates,
            };
            AblationReport {
                mode,
                arms: vec![
                    Arm {
                        label: "before".into(),
                        report: before.report,
                    },
                    Arm {
                        label: "after".into(),
                        report: after.report,
                    },
                ],
                evolution: Some(cycle),
                tool_choice: Some(tool_choice),
            }
        }
    };
    check_inputs(&report.arms)?;
    if let Some(dir) = out_dir {
        let mut json = serde_json::to_vec_pretty(&report).expect("ablation report serializes");
        json.push(b'\n');
        write(&dir.join("ablation.json"), &json)?;
    }
    Ok(report)
}
