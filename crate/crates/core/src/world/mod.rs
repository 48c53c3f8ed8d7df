//! The simulated environment an agent acts in: registered tools with seeded
//! failure injection, peers for etic actions, and an optional mini text
//! environment.

mod inject;
mod minienv;
mod tools;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::ScriptedScenario;
use crate::cognition::{CognitionState, PeerProfile, SkillTemplate, ToolProfile};
use crate::model::{Outcome, Parameters, TaskSpec, FINAL_ANSWER_ACTION, GENERATE_ACTION};

pub use inject::{fnv1a64, splitmix64, task_stream_seed, FailureInjector, Lcg64, LCG_INCREMENT, LCG_MULTIPLIER};
pub use minienv::{Affordance, Goal, MiniEnv, MiniEnvSpec, Placement};
pub use tools::{evaluate, normalize_key, ToolHandler, ToolSpec};

pub const INJECTED_FAILURE: &str = "injected failure";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WorldError {
    #[error("unknown tool {0}")]
    UnknownTool(String),
    #[error("parameters for {tool} violate its schema: {reason}")]
    SchemaViolation { tool: String, reason: String },
    #[error("unknown peer {0}")]
    UnknownPeer(String),
    #[error("delegation depth {depth} reached the cap {cap}")]
    DepthExceeded { depth: usize, cap: usize },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

/// A peer agent reachable through etic actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeerSpec {
    pub peer_id: String,
    /// Expertise text per domain tag; seeds the peer profile.
    #[serde(default)]
    pub expertise: BTreeMap<String, String>,
    pub responder: PeerResponder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PeerResponder {
    /// Answers by normalized lookup of the request text.
    Table {
        table: BTreeMap<String, String>,
        #[serde(default)]
        default: Option<String>,
    },
    /// A nested agent with its own world, cognition and scripted backend.
    Agent {
        scenario: Box<Scenario>,
        #[serde(default)]
        max_steps: Option<usize>,
    },
}

/// Everything a run needs besides the tasks and the run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub tools: Vec<ToolSpec>,
    #[serde(default)]
    pub peers: Vec<PeerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mini_env: Option<MiniEnvSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skills: Vec<SkillTemplate>,
    /// Responses for the scripted backend.
    #[serde(default)]
    pub script: ScriptedScenario,
    /// Per-task scripts layered over `script`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub task_scripts: BTreeMap<String, ScriptedScenario>,
}

const AFFORDANCE_TOOLS: [(&str, &str); 4] = [
    ("go", "walk to an adjacent room"),
    ("look", "describe the current room, held objects and exits"),
    ("take", "pick up an object in the current room"),
    ("put", "put a held object down in the current room"),
];

impl Scenario {
    /// The script a task's scripted backend answers from.
    pub fn script_for(&self, task_id: &str) -> ScriptedScenario {
        match self.task_scripts.get(task_id) {
            Some(top) => self.script.overlaid(top),
            None => self.script.clone(),
        }
    }

    /// Declared tools plus the environment affordances a map implies.
    pub fn resolved_tools(&self) -> Vec<ToolSpec> {
        let mut tools = self.tools.clone();
        if self.mini_env.is_some() {
            for (name, description) in AFFORDANCE_TOOLS {
                if !tools.iter().any(|t| t.name == name) {
                    let handler = match name {
                        "go" => ToolHandler::Go,
                        "look" => ToolHandler::Look,
                        "take" => ToolHandler::Take,
                        _ => ToolHandler::Put,
                    };
                    tools.push(ToolSpec::new(name, description, handler));
                }
            }
        }
        tools.sort_by(|a, b| a.name.cmp(&b.name));
        tools
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |why: String| Err(WorldError::InvalidScenario(why));
        let mut names = BTreeSet::new();
        for tool in self.resolved_tools() {
            if tool.name.is_empty() || tool.name.contains(':') || tool.name.contains(char::is_whitespace) {
                return bad(format!("tool name {:?} is not a plain identifier", tool.name));
            }
            if tool.name == GENERATE_ACTION || tool.name == FINAL_ANSWER_ACTION {
                return bad(format!("tool name {} is reserved", tool.name));
            }
            if !names.insert(tool.name.clone()) {
                return bad(format!("duplicate tool {}", tool.name));
            }
            if !(0.0..=1.0).contains(&tool.failure_probability) {
                return bad(format!("failure probability of {} outside [0, 1]", tool.name));
            }
            if tool.description.trim().is_empty() {
                return bad(format!("tool {} has no description", tool.name));
            }
        }
        let mut peers = BTreeSet::new();
        for peer in &self.peers {
            if peer.peer_id.is_empty() || peer.peer_id.contains(char::is_whitespace) {
                return bad(format!("peer id {:?} is not a plain identifier", peer.peer_id));
            }
            if !peers.insert(peer.peer_id.clone()) {
                return bad(format!("duplicate peer {}", peer.peer_id));
            }
            if let PeerResponder::Agent { scenario, .. } = &peer.responder {
                scenario.validate()?;
            }
        }
        if let Some(spec) = &self.mini_env {
            MiniEnv::new(spec.clone())?;
        }
        Ok(())
    }

    /// The seed cognition: tool descriptions, peer expertise and skills.
    pub fn seed_cognition(&self) -> CognitionState {
        let mut state = CognitionState::default();
        for tool in self.resolved_tools() {
            state
                .tools
                .insert(tool.name.clone(), ToolProfile::new(tool.name.clone(), tool.description.clone()));
        }
        for peer in &self.peers {
            state.peers.insert(
                peer.peer_id.clone(),
                PeerProfile {
                    peer_id: peer.peer_id.clone(),
                    expertise: peer.expertise.clone(),
                    reliability: Default::default(),
                    response_pattern_notes: Vec::new(),
                    revision_log: Vec::new(),
                },
            );
        }
        for skill in &self.skills {
            state.skills.insert(skill.skill_id.clone(), skill.clone());
        }
        state
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invocation {
    pub outcome: Outcome,
    pub ticks: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EticKind {
    Ask,
    Delegate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EticRequest {
    pub kind: EticKind,
    pub peer_id: String,
    pub payload: String,
    /// Depth of the calling agent; the top-level agent is at 0.
    pub depth: usize,
    pub depth_cap: usize,
    /// Task the nested agent receives if the peer is an agent.
    pub nested_task: TaskSpec,
}

/// Runs a nested agent and returns its final answer.
pub trait NestedRunner {
    fn run_nested(&mut self, scenario: &Scenario, max_steps: Option<usize>, task: TaskSpec, depth: usize)
        -> Option<String>;
}

/// Per-run world state.
#[derive(Debug, Clone)]
pub struct World {
    tools: BTreeMap<String, ToolSpec>,
    injectors: BTreeMap<String, FailureInjector>,
    peers: BTreeMap<String, PeerSpec>,
    env: Option<MiniEnv>,
}

impl World {
    /// Builds the world for one task; injector streams derive from
    /// `(run_seed, tool seed, task_id)`.
    pub fn from_scenario(scenario: &Scenario, run_seed: u64, task_id: &str) -> Result<Self, WorldError> {
        scenario.validate()?;
        let tools: BTreeMap<String, ToolSpec> =
            scenario.resolved_tools().into_iter().map(|t| (t.name.clone(), t)).collect();
        let injectors = tools
            .values()
            .map(|t| {
                let seed = task_stream_seed(run_seed, t.failure_seed, task_id);
                (t.name.clone(), FailureInjector::new(t.failure_probability, seed))
            })
            .collect();
        Ok(World {
            tools,
            injectors,
            peers: scenario.peers.iter().map(|p| (p.peer_id.clone(), p.clone())).collect(),
            env: scenario.mini_env.clone().map(MiniEnv::new).transpose()?,
        })
    }

    pub fn tools(&self) -> impl Iterator<Item = &ToolSpec> {
        self.tools.values()
    }

    pub fn tool(&self, name: &str) -> Option<&ToolSpec> {
        self.tools.get(name)
    }

    pub fn peers(&self) -> impl Iterator<Item = &PeerSpec> {
        self.peers.values()
    }

    pub fn env(&self) -> Option<&MiniEnv> {
        self.env.as_ref()
    }

    pub fn injector(&self, tool: &str) -> Option<&FailureInjector> {
        self.injectors.get(tool)
    }

    pub fn invoke_tool(&mut self, name: &str, params: &Parameters) -> Result<Invocation, WorldError> {
        let spec = self.tools.get(name).ok_or_else(|| WorldError::UnknownTool(name.to_string()))?;
        let schema = spec.schema();
        let violation = |reason: String| WorldError::SchemaViolation {
            tool: name.to_string(),
            reason,
        };
        if let Some(missing) = schema.iter().find(|p| p.required && !params.contains_key(&p.name)) {
            return Err(violation(format!("missing required parameter {}", missing.name)));
        }
        if let Some(extra) = params.keys().find(|k| !schema.iter().any(|p| &p.name == *k)) {
            return Err(violation(format!("unknown parameter {extra}")));
        }

        let injector = self.injectors.get_mut(name).expect("one injector per tool");
        if injector.draw() {
            return Ok(Invocation {
                outcome: Outcome::tool_error(INJECTED_FAILURE),
                ticks: spec.ticks,
            });
        }
        if spec.ticks > spec.timeout_ticks {
            return Ok(Invocation {
                outcome: Outcome::timeout(format!("{name} exceeded {} ticks", spec.timeout_ticks)),
                ticks: spec.timeout_ticks,
            });
        }
        let ticks = spec.ticks;
        let outcome = if spec.handler.is_env_affordance() {
            let arg = |k: &str| params.get(k).cloned().unwrap_or_default();
            let action = match spec.handler {
                ToolHandler::Go => Affordance::Go { room: arg("room") },
                ToolHandler::Look => Affordance::Look,
                ToolHandler::Take => Affordance::Take { object: arg("object") },
                _ => Affordance::Put {
                    object: arg("object"),
                    room: arg("room"),
                },
            };
            match self.env.as_mut() {
                Some(env) => Outcome::success(env.step(&action)),
                None => Outcome::tool_error("no environment is loaded"),
            }
        } else {
            tools::run_pure(&spec.handler, params)
        };
        Ok(Invocation { outcome, ticks })
    }

    /// Ask returns the peer's reply; Delegate hands the request to the peer
    /// as a task and returns its final answer. Both come back as
    /// `PeerResponse`. Reaching an agent peer needs `depth < depth_cap`.
    pub fn route_etic(&mut self, request: EticRequest, runner: &mut dyn NestedRunner) -> Result<Outcome, WorldError> {
        let peer = self
            .peers
            .get(&request.peer_id)
            .ok_or_else(|| WorldError::UnknownPeer(request.peer_id.clone()))?;
        let needs_depth = request.kind == EticKind::Delegate || matches!(peer.responder, PeerResponder::Agent { .. });
        if needs_depth && request.depth >= request.depth_cap {
            return Err(WorldError::DepthExceeded {
                depth: request.depth,
                cap: request.depth_cap,
            });
        }
        let reply = match &peer.responder {
            PeerResponder::Table { table, default } => {
                let key = normalize_key(&request.payload);
                table
                    .iter()
                    .find(|(k, _)| normalize_key(k) == key)
                    .map(|(_, v)| v.clone())
                    .or_else(|| default.clone())
            }
            PeerResponder::Agent { scenario, max_steps } => {
                runner.run_nested(scenario, *max_steps, request.nested_task, request.depth + 1)
            }
        };
        Ok(Outcome::peer(reply.unwrap_or_else(|| "no answer".to_string())))
    }
}
