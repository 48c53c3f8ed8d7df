use std::collections::BTreeMap;

use crate::cognition::{
    reliability_update, CognitionStore, Reliability, Revision, RevisionEdit, RevisionTarget, UsageExample,
};
use crate::model::{first_words, ActionKind, ActionRecord, OutcomeStatus, StepRef, Trajectory};

use super::{EvolutionConfig, Verdict, Verdicts};

/// Appended to a peer's expertise line when its estimate on a tag rises
/// above the high threshold.
pub const STRONG_NOTE: &str = "(consistently reliable on this tag)";
/// Appended when the estimate falls below the low threshold.
pub const WEAK_NOTE: &str = "(often unreliable on this tag)";

const EXAMPLE_SUMMARY_WORDS: usize = 12;

fn reliability_target(kind: &ActionKind) -> Option<RevisionTarget> {
    match kind {
        ActionKind::EmicToolCall(t) => Some(RevisionTarget::Tool(t.clone())),
        ActionKind::EmicCompositeInvoke(c) => Some(RevisionTarget::Composite(c.clone())),
        ActionKind::EticAsk(p) | ActionKind::EticDelegate(p) => Some(RevisionTarget::Peer(p.clone())),
        _ => None,
    }
}

fn detail(record: &ActionRecord) -> &str {
    record.outcome.error_detail.as_deref().unwrap_or(&record.outcome.payload)
}

/// Longest run of leading words shared by every text.
fn common_word_prefix<'a>(texts: impl IntoIterator<Item = &'a str>) -> String {
    let mut iter = texts.into_iter();
    let Some(first) = iter.next() else {
        return String::new();
    };
    let mut prefix: Vec<&str> = first.split_whitespace().collect();
    for text in iter {
        let n = prefix
            .iter()
            .zip(text.split_whitespace())
            .take_while(|(a, b)| *a == b)
            .count();
        prefix.truncate(n);
    }
    prefix.join(" ")
}

fn strip_notes(text: &str) -> String {
    text.replace(STRONG_NOTE, "").replace(WEAK_NOTE, "").trim().to_string()
}

/// Proposes descriptive revisions from aligned trajectories. Every
/// proposal carries the steps it came from; whether it is new is left to
/// validation, except for reliability evidence, which is filtered here so
/// peer projections count each step once.
pub fn propose_revisions(
    store: &CognitionStore,
    corpus: &[Trajectory],
    verdicts: &Verdicts,
    config: &EvolutionConfig,
) -> Vec<Revision> {
    let state = store.state();
    let mut out = Vec::new();
    let mut violated: BTreeMap<(String, String), Vec<(StepRef, &ActionRecord)>> = BTreeMap::new();
    let mut fulfilled: BTreeMap<String, Vec<(StepRef, &ActionRecord)>> = BTreeMap::new();
    let mut peer_evidence: BTreeMap<(String, String), (Reliability, Vec<StepRef>)> = BTreeMap::new();

    for trajectory in corpus {
        let tags = trajectory.task.reliability_tags();
        for record in &trajectory.records {
            let step = StepRef::new(trajectory.task.task_id.clone(), record.step_index);
            let verdict = verdicts.get(&step).map(|v| v.verdict).unwrap_or(Verdict::Indeterminate);

            if let Some(target) = reliability_target(&record.kind) {
                let is_peer = matches!(target, RevisionTarget::Peer(_));
                // peers answer in free text; without a judgment their
                // response says nothing about correctness
                let judged_ok = match verdict {
                    Verdict::Indeterminate if is_peer => None,
                    Verdict::Indeterminate => Some(true),
                    v => Some(v.is_positive()),
                };
                if let Some(judged_ok) = judged_ok {
                    for tag in &tags {
                        let Ok(revision) = reliability_update(
                            state,
                            &target,
                            tag,
                            &record.outcome,
                            judged_ok,
                            vec![step.clone()],
                        ) else {
                            continue;
                        };
                        if store.has_reliability_evidence(&target, tag, &step) {
                            continue;
                        }
                        if let (RevisionTarget::Peer(p), RevisionEdit::AdjustReliability { success, .. }) =
                            (&target, &revision.edit)
                        {
                            let entry = peer_evidence.entry((p.clone(), tag.clone())).or_default();
                            entry.0.record(*success);
                            entry.1.push(step.clone());
                        }
                        out.push(revision);
                    }
                }
            }

            if let ActionKind::EmicToolCall(tool) = &record.kind {
                if !state.tools.contains_key(tool) {
                    continue;
                }
                if verdict == Verdict::Violated && record.outcome.is_error() {
                    let prefix = first_words(detail(record), config.failure_prefix_words);
                    if !prefix.is_empty() {
                        violated.entry((tool.clone(), prefix)).or_default().push((step.clone(), record));
                    }
                }
                if verdict == Verdict::Fulfilled && record.outcome.status == OutcomeStatus::Success {
                    fulfilled.entry(tool.clone()).or_default().push((step.clone(), record));
                }
            }
        }
    }

    for ((tool, _), steps) in violated {
        if steps.len() < config.failure_pattern_threshold {
            continue;
        }
        let text = common_word_prefix(steps.iter().map(|(_, r)| detail(r)));
        out.push(Revision::propose(
            RevisionTarget::Tool(tool),
            RevisionEdit::AddFailurePattern { text },
            steps.into_iter().map(|(s, _)| s).collect(),
        ));
    }

    for (tool, steps) in fulfilled {
        let existing = &state.tools[&tool].usage_examples;
        let mut room = config.examples_per_tool.saturating_sub(existing.len());
        let mut proposed: Vec<UsageExample> = Vec::new();
        for (step, record) in steps {
            if room == 0 {
                break;
            }
            let example = UsageExample {
                parameters: record.parameters.clone(),
                outcome_summary: first_words(&record.outcome.payload, EXAMPLE_SUMMARY_WORDS),
            };
            if existing.contains(&example) || proposed.contains(&example) {
                continue;
            }
            proposed.push(example.clone());
            room -= 1;
            out.push(Revision::propose(
                RevisionTarget::Tool(tool.clone()),
                RevisionEdit::AddExample { example },
                vec![step],
            ));
        }
    }

    for ((peer, tag), (fresh, steps)) in peer_evidence {
        let Some(profile) = state.peers.get(&peer) else {
            continue;
        };
        let mut projected = profile.reliability.get(&tag).copied().unwrap_or_default();
        projected.successes += fresh.successes;
        projected.attempts += fresh.attempts;
        let estimate = projected.estimate();
        let note = if estimate >= config.peer_high_threshold {
            STRONG_NOTE
        } else if estimate <= config.peer_low_threshold {
            WEAK_NOTE
        } else {
            continue;
        };
        let previous = profile.expertise.get(&tag).cloned();
        let base = previous.as_deref().map(strip_notes).unwrap_or_else(|| tag.clone());
        let text = format!("{base} {note}");
        if previous.as_deref() == Some(text.as_str()) {
            continue;
        }
        out.push(Revision::propose(
            RevisionTarget::Peer(peer),
            RevisionEdit::AmendPeerExpertise {
                domain_tag: tag,
                text,
                previous: None,
            },
            steps,
        ));
    }
    out
}
