use super::{
    CognitionError, CognitionState, Reliability, ReliabilityTable, Revision, RevisionEdit,
    RevisionTarget, SkillBody,
};
use crate::model::{Outcome, OutcomeStatus, StepRef, FINAL_ANSWER_ACTION, GENERATE_ACTION};

pub const DEFAULT_TOP_FAILURE_PATTERNS: usize = 3;

const GENERATE_DESCRIPTION: &str =
    "reason or draft text with the language model; the completion becomes the step outcome";
const FINAL_ANSWER_DESCRIPTION: &str = "finish the task and report the answer";

/// `"s/n on tag T (estimate 0.xxx)"`.
pub fn render_reliability(reliability: &Reliability, tag: &str) -> String {
    format!(
        "{}/{} on tag {} (estimate {:.3})",
        reliability.successes,
        reliability.attempts,
        tag,
        reliability.estimate()
    )
}

fn reliability_lines(out: &mut Vec<String>, table: &ReliabilityTable, tags: &[String]) {
    for tag in tags {
        let r = table.get(tag).copied().unwrap_or_default();
        out.push(format!("reliability: {}", render_reliability(&r, tag)));
    }
}

fn precondition_lines(out: &mut Vec<String>, preconditions: &[String]) {
    if preconditions.is_empty() {
        out.push("preconditions: none".to_string());
    }
    for p in preconditions {
        out.push(format!("precondition: {p}"));
    }
}

fn render_one(state: &CognitionState, name: &str, tags: &[String]) -> Result<String, CognitionError> {
    let unknown = || CognitionError::UnknownAction(name.to_string());
    let mut out = Vec::new();
    if name == GENERATE_ACTION {
        out.push(format!("description: {GENERATE_DESCRIPTION}"));
    } else if name == FINAL_ANSWER_ACTION {
        out.push(format!("description: {FINAL_ANSWER_DESCRIPTION}"));
    } else if let Some(id) = name.strip_prefix("skill:") {
        let skill = state.skills.get(id).ok_or_else(unknown)?;
        out.push(format!("description: {}", skill.intent));
        for t in &skill.trigger_conditions {
            out.push(format!("trigger: {t}"));
        }
        let form = match &skill.body {
            SkillBody::Prompt { .. } => "prompt template".to_string(),
            SkillBody::Actions { steps } => steps
                .iter()
                .map(|s| s.kind.name())
                .collect::<Vec<_>>()
                .join(" -> "),
        };
        out.push(format!("procedure: {form}"));
    } else if let Some(id) = name.strip_prefix("composite:") {
        let composite = state.composites.get(id).ok_or_else(unknown)?;
        out.push(format!("description: {}", composite.goal));
        precondition_lines(&mut out, &composite.preconditions);
        let chain = composite
            .steps
            .iter()
            .map(|s| s.kind.name())
            .collect::<Vec<_>>()
            .join(" -> ");
        out.push(format!("steps: {chain}"));
        out.push(format!("expected output: {}", composite.expected_output_pattern));
        reliability_lines(&mut out, &composite.reliability, tags);
    } else if let Some((mode, peer_id)) = name
        .strip_prefix("ask:")
        .map(|p| ("ask", p))
        .or_else(|| name.strip_prefix("delegate:").map(|p| ("delegate", p)))
    {
        let peer = state.peers.get(peer_id).ok_or_else(unknown)?;
        out.push(match mode {
            "ask" => format!("description: ask peer {peer_id} a question and read its reply"),
            _ => format!("description: hand the remaining task to peer {peer_id} and wait for its answer"),
        });
        for (tag, text) in &peer.expertise {
            out.push(format!("expertise on {tag}: {text}"));
        }
        for note in &peer.response_pattern_notes {
            out.push(format!("note: {note}"));
        }
        reliability_lines(&mut out, &peer.reliability, tags);
    } else {
        let tool = state.tools.get(name).ok_or_else(unknown)?;
        out.push(format!("description: {}", tool.description));
        precondition_lines(&mut out, &tool.preconditions);
        let mut patterns: Vec<_> = tool.failure_patterns.iter().enumerate().collect();
        // stable: equal support keeps insertion order
        patterns.sort_by(|(ia, a), (ib, b)| b.support.cmp(&a.support).then(ia.cmp(ib)));
        for (_, p) in patterns.into_iter().take(DEFAULT_TOP_FAILURE_PATTERNS) {
            out.push(format!("known failure: {} (seen {}x)", p.text, p.support));
        }
        reliability_lines(&mut out, &tool.reliability, tags);
        for ex in &tool.usage_examples {
            let params = ex
                .parameters
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join("; ");
            out.push(format!("example: {params} -> {}", ex.outcome_summary));
        }
    }
    Ok(out.join("\n"))
}

/// One rendered knowledge block per requested action name, in request
/// order. Reliability lines are emitted per requested tag.
pub fn query_action_knowledge(
    state: &CognitionState,
    names: &[String],
    tags: &[String],
) -> Result<Vec<String>, CognitionError> {
    names.iter().map(|n| render_one(state, n, tags)).collect()
}

/// Proposes the reliability revision for one observed outcome.
///
/// A `Success` counts as a success unless the caller judged it otherwise;
/// a `PeerResponse` counts only when `judged_ok` is set.
pub fn reliability_update(
    state: &CognitionState,
    target: &RevisionTarget,
    domain_tag: &str,
    outcome: &Outcome,
    judged_ok: bool,
    provenance: Vec<StepRef>,
) -> Result<Revision, CognitionError> {
    let exists = match target {
        RevisionTarget::Tool(n) => state.tools.contains_key(n),
        RevisionTarget::Peer(n) => state.peers.contains_key(n),
        RevisionTarget::Composite(n) => state.composites.contains_key(n),
        RevisionTarget::Skill(_) => false,
    };
    if !exists {
        return Err(CognitionError::UnknownAction(target.to_string()));
    }
    let success = judged_ok
        && matches!(outcome.status, OutcomeStatus::Success | OutcomeStatus::PeerResponse);
    Ok(Revision::propose(
        target.clone(),
        RevisionEdit::AdjustReliability {
            domain_tag: domain_tag.to_string(),
            success,
        },
        provenance,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cognition::{CognitionStore, FailurePattern, ToolProfile};

    fn state() -> CognitionState {
        let mut s = CognitionState::default();
        s.tools.insert(
            "web_search".into(),
            ToolProfile::new("web_search", "search the web for a short factual answer"),
        );
        s
    }

    fn tags() -> Vec<String> {
        vec!["qa".into()]
    }

    #[test]
    fn seed_description_verbatim() {
        let blocks = query_action_knowledge(&state(), &["web_search".into()], &tags()).unwrap();
        assert_eq!(
            blocks[0],
            "description: search the web for a short factual answer\npreconditions: none\nreliability: 0/0 on tag qa (estimate 0.500)"
        );
    }

    #[test]
    fn unknown_action() {
        assert_eq!(
            query_action_knowledge(&state(), &["nonexistent".into()], &tags()),
            Err(CognitionError::UnknownAction("nonexistent".into()))
        );
    }

    #[test]
    fn precondition_visible_after_commit() {
        let mut store = CognitionStore::new(state());
        store
            .commit(Revision::propose(
                RevisionTarget::Tool("web_search".into()),
                RevisionEdit::AddPrecondition { text: "query must name the entity".into() },
                vec![StepRef::new("t", 0)],
            ))
            .unwrap();
        let block = &query_action_knowledge(store.state(), &["web_search".into()], &tags()).unwrap()[0];
        assert!(block.contains("precondition: query must name the entity"));
    }

    #[test]
    fn top_failure_patterns_by_support() {
        let mut s = state();
        let tool = s.tools.get_mut("web_search").unwrap();
        for (text, support) in [("a...", 3), ("b...", 5), ("c...", 3), ("d...", 4)] {
            tool.failure_patterns.push(FailurePattern { text: text.into(), support });
        }
        let block = &query_action_knowledge(&s, &["web_search".into()], &tags()).unwrap()[0];
        let shown: Vec<&str> = block.lines().filter(|l| l.starts_with("known failure")).collect();
        assert_eq!(
            shown,
            vec!["known failure: b... (seen 5x)", "known failure: d... (seen 4x)", "known failure: a... (seen 3x)"]
        );
    }

    #[test]
    fn smoothed_estimates_after_one_outcome() {
        for (outcome, expected) in [
            (Outcome::success("ok"), 2.0 / 3.0),
            (Outcome::tool_error("boom"), 1.0 / 3.0),
        ] {
            let mut store = CognitionStore::new(state());
            let target = RevisionTarget::Tool("web_search".into());
            let rev = reliability_update(store.state(), &target, "qa", &outcome, true, vec![StepRef::new("t", 0)])
                .unwrap();
            store.commit(rev).unwrap();
            let r = store.state().tools["web_search"].reliability["qa"];
            assert_eq!(r.estimate(), expected);
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let s = state();
        let names = vec!["web_search".to_string(), GENERATE_ACTION.to_string()];
        assert_eq!(
            query_action_knowledge(&s, &names, &tags()).unwrap(),
            query_action_knowledge(&s, &names, &tags()).unwrap()
        );
    }
}
