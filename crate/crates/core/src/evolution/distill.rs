use std::collections::BTreeMap;

use crate::backend::{CallSite, CompletionBackend, CompletionRequest, GenerationLimits};
use crate::cognition::{SkillBody, SkillStep, SkillTemplate};
use crate::emo::Episode;
use crate::model::{ActionKind, OutcomeStatus, StepRef, Trajectory};

use super::{EvolutionError, Verdicts};

const PLACEHOLDER: &str = "subject";

fn skill_id(episode: &Episode) -> String {
    let slug: Vec<String> = episode
        .goal
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty())
        .take(5)
        .map(str::to_ascii_lowercase)
        .collect();
    if slug.is_empty() {
        format!("episode-{}", episode.episode_id)
    } else {
        slug.join("-")
    }
}

fn distill_prompt(task: &str, episode: &Episode) -> String {
    format!(
        "A finished episode is being turned into a reusable procedure.\n\n\
         ## Task\n{task}\n\n## Episode\ngoal: {}\nactions: {}\nresolution: {}\n\n\
         List the conditions under which this procedure should be used, one per line.",
        episode.goal,
        episode.key_actions.join(", "),
        episode.resolution
    )
}

fn trigger_lines(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.trim().trim_start_matches(['-', '*']).trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

/// Turns a successful episode into a skill proposal.
///
/// The body replays the covered actions. Parameter values found verbatim
/// in the task instruction become placeholders `{subject}`, `{subject_2}`
/// and so on, one per distinct value. Final answers and unparsable
/// selections are left out of the body.
pub fn distill_skill(
    trajectory: &Trajectory,
    episode: &Episode,
    verdicts: &Verdicts,
    analyzer: Option<&dyn CompletionBackend>,
    limits: GenerationLimits,
) -> Result<SkillTemplate, EvolutionError> {
    let task = &trajectory.task;
    let covered: Vec<_> = trajectory
        .records
        .iter()
        .filter(|r| episode.covers(r.step_index))
        .collect();
    for record in &covered {
        let step = StepRef::new(task.task_id.clone(), record.step_index);
        let positive = verdicts.get(&step).map(|v| v.verdict.is_positive()).unwrap_or(false);
        if !positive {
            return Err(EvolutionError::EpisodeNotSuccessful(step));
        }
    }

    let mut lifted: BTreeMap<String, String> = BTreeMap::new();
    let mut parameters = Vec::new();
    let mut steps = Vec::new();
    for record in covered {
        if record.kind == ActionKind::FinalAnswer || record.outcome.status == OutcomeStatus::ParseError {
            continue;
        }
        let mut params = record.parameters.clone();
        for value in params.values_mut() {
            if value.trim().is_empty() || !task.instruction.contains(value.as_str()) {
                continue;
            }
            let name = lifted
                .entry(value.clone())
                .or_insert_with(|| {
                    let name = match parameters.len() {
                        0 => PLACEHOLDER.to_string(),
                        n => format!("{PLACEHOLDER}_{}", n + 1),
                    };
                    parameters.push(name.clone());
                    name
                })
                .clone();
            *value = format!("{{{name}}}");
        }
        steps.push(SkillStep {
            kind: record.kind.clone(),
            parameters: params,
        });
    }

    let from_analyzer = analyzer
        .and_then(|a| {
            let request = CompletionRequest::new(CallSite::Distill, distill_prompt(&task.instruction, episode), limits);
            a.complete(&request).ok()
        })
        .map(|c| trigger_lines(&c.text))
        .filter(|lines| !lines.is_empty());
    let trigger_conditions = from_analyzer.unwrap_or_else(|| episode.key_actions.clone());

    Ok(SkillTemplate {
        skill_id: skill_id(episode),
        intent: episode.goal.clone(),
        trigger_conditions,
        parameters,
        body: SkillBody::Actions { steps },
        revision_log: Vec::new(),
    })
}
