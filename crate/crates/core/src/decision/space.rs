use serde::{Deserialize, Serialize};

use crate::cognition::{query_action_knowledge, PinnedCognition};
use crate::model::{ActionKind, ParamSpec};
use crate::world::World;

/// A selectable action as offered to the backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDescriptor {
    pub kind: ActionKind,
    pub name: String,
    pub rendered_knowledge: String,
    pub parameter_schema: Vec<ParamSpec>,
    /// Cognition version the knowledge was rendered from.
    pub cognition_version: u64,
}

impl ActionDescriptor {
    pub fn kind_label(&self) -> &'static str {
        match self.kind {
            ActionKind::EmicGenerate => "generate",
            ActionKind::EmicToolCall(_) => "tool",
            ActionKind::EmicSkillInvoke(_) => "skill",
            ActionKind::EmicCompositeInvoke(_) => "composite",
            ActionKind::EticAsk(_) => "ask",
            ActionKind::EticDelegate(_) => "delegate",
            ActionKind::FinalAnswer => "final",
        }
    }
}

pub const GENERATE_PARAM: &str = "prompt";
pub const ASK_PARAM: &str = "question";
pub const DELEGATE_PARAM: &str = "task";
pub const ANSWER_PARAM: &str = "answer";

/// Generate, tools, skills, composites, asks, delegations, FinalAnswer;
/// lexicographic by name within each kind. Knowledge comes from one pinned
/// cognition version.
pub fn build_action_space(cognition: &PinnedCognition, world: &World, tags: &[String]) -> Vec<ActionDescriptor> {
    let state = &cognition.state;
    let mut kinds: Vec<(ActionKind, Vec<ParamSpec>)> = vec![(
        ActionKind::EmicGenerate,
        vec![ParamSpec::required(GENERATE_PARAM, "what to ask the language model")],
    )];
    for tool in world.tools() {
        kinds.push((ActionKind::EmicToolCall(tool.name.clone()), tool.schema()));
    }
    for skill in state.skills.values() {
        let params = skill
            .parameters
            .iter()
            .map(|p| ParamSpec::required(p.clone(), "skill parameter"))
            .collect();
        kinds.push((ActionKind::EmicSkillInvoke(skill.skill_id.clone()), params));
    }
    for composite in state.composites.values() {
        let params = composite
            .inputs
            .iter()
            .map(|p| ParamSpec::required(p.clone(), "composite input"))
            .collect();
        kinds.push((ActionKind::EmicCompositeInvoke(composite.composite_id.clone()), params));
    }
    for peer in world.peers() {
        kinds.push((
            ActionKind::EticAsk(peer.peer_id.clone()),
            vec![ParamSpec::required(ASK_PARAM, "question for the peer")],
        ));
    }
    for peer in world.peers() {
        kinds.push((
            ActionKind::EticDelegate(peer.peer_id.clone()),
            vec![ParamSpec::required(DELEGATE_PARAM, "sub-task for the peer to solve")],
        ));
    }
    kinds.push((
        ActionKind::FinalAnswer,
        vec![ParamSpec::required(ANSWER_PARAM, "the final answer")],
    ));
    kinds.sort_by(|(a, _), (b, _)| a.rank().cmp(&b.rank()).then_with(|| a.name().cmp(&b.name())));

    kinds
        .into_iter()
        .map(|(kind, parameter_schema)| {
            let name = kind.name();
            let rendered_knowledge = match query_action_knowledge(state, std::slice::from_ref(&name), tags) {
                Ok(mut blocks) => blocks.remove(0),
                // a world tool the cognition does not know yet
                Err(_) => match &kind {
                    ActionKind::EmicToolCall(t) => world
                        .tool(t)
                        .map(|spec| format!("description: {}", spec.description))
                        .unwrap_or_default(),
                    _ => String::new(),
                },
            };
            ActionDescriptor {
                kind,
                name,
                rendered_knowledge,
                parameter_schema,
                cognition_version: cognition.version,
            }
        })
        .collect()
}
