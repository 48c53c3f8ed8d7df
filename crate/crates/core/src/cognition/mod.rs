//! Evolvable descriptive knowledge.
//!
//! Internal cognition covers tool profiles, the skill library and mined
//! composite actions. External cognition covers peer profiles and
//! environmental feedback estimates. The store is a materialized view over
//! an append-only revision log: every edit is a validated [`Revision`] that
//! carries the steps it was derived from.

mod render;
mod store;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ActionKind, Parameters, StepRef};

pub use render::{
    query_action_knowledge, reliability_update, render_reliability, DEFAULT_TOP_FAILURE_PATTERNS,
};
pub use store::{CognitionStore, PinnedCognition, RejectReason, Validation, SNAPSHOT_FORMAT_VERSION};

#[derive(Debug, Error, PartialEq)]
pub enum CognitionError {
    #[error("unknown action {0}")]
    UnknownAction(String),
    #[error("revision was not accepted by validation: {0}")]
    NotValidated(RejectReason),
    #[error("replay diverged at revision {index}: {reason}")]
    ReplayDiverged { index: usize, reason: String },
    #[error("malformed store snapshot line {line}: {reason}")]
    MalformedSnapshot { line: usize, reason: String },
}

/// Success counts for one domain tag.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reliability {
    pub successes: u64,
    pub attempts: u64,
}

impl Reliability {
    pub fn record(&mut self, success: bool) {
        self.attempts += 1;
        if success {
            self.successes += 1;
        }
    }

    /// Laplace-smoothed success estimate `(s + 1) / (n + 2)`.
    pub fn estimate(&self) -> f64 {
        (self.successes as f64 + 1.0) / (self.attempts as f64 + 2.0)
    }
}

pub type ReliabilityTable = BTreeMap<String, Reliability>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailurePattern {
    pub text: String,
    /// Number of failing steps the pattern was distilled from.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageExample {
    pub parameters: Parameters,
    pub outcome_summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolProfile {
    pub name: String,
    pub description: String,
    #[serde(default)]
    pub preconditions: Vec<String>,
    #[serde(default)]
    pub failure_patterns: Vec<FailurePattern>,
    #[serde(default)]
    pub usage_examples: Vec<UsageExample>,
    #[serde(default)]
    pub reliability: ReliabilityTable,
    #[serde(default)]
    pub revision_log: Vec<String>,
}

impl ToolProfile {
    pub fn new(name: impl Into<String>, description: impl Into<String>) -> Self {
        ToolProfile {
            name: name.into(),
            description: description.into(),
            preconditions: Vec::new(),
            failure_patterns: Vec::new(),
            usage_examples: Vec::new(),
            reliability: ReliabilityTable::new(),
            revision_log: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillStep {
    pub kind: ActionKind,
    /// Values may contain `{placeholder}` references to skill parameters.
    pub parameters: Parameters,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum SkillBody {
    Prompt { template: String },
    Actions { steps: Vec<SkillStep> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillTemplate {
    pub skill_id: String,
    pub intent: String,
    #[serde(default)]
    pub trigger_conditions: Vec<String>,
    #[serde(default)]
    pub parameters: Vec<String>,
    pub body: SkillBody,
    #[serde(default)]
    pub revision_log: Vec<String>,
}

/// `{name}` placeholders in a template string, in order of appearance.
pub fn placeholders(text: &str) -> Vec<String> {
    let mut found = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                let name = &after[..close];
                if !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    found.push(name.to_string());
                }
                rest = &after[close + 1..];
            }
            None => break,
        }
    }
    found
}

/// Replaces `{name}` placeholders with bound values; unknown ones are kept.
pub fn fill_placeholders(text: &str, values: &Parameters) -> String {
    let mut out = text.to_string();
    for (name, value) in values {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    out
}

impl SkillTemplate {
    pub fn body_is_empty(&self) -> bool {
        match &self.body {
            SkillBody::Prompt { template } => template.trim().is_empty(),
            SkillBody::Actions { steps } => steps.is_empty(),
        }
    }

    pub fn used_placeholders(&self) -> BTreeSet<String> {
        match &self.body {
            SkillBody::Prompt { template } => placeholders(template).into_iter().collect(),
            SkillBody::Actions { steps } => steps
                .iter()
                .flat_map(|s| s.parameters.values())
                .flat_map(|v| placeholders(v))
                .collect(),
        }
    }
}

/// Where a composite step parameter gets its value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binding {
    Literal(String),
    /// The payload of an earlier step of the same composite.
    Output(usize),
    /// A parameter supplied when the composite is invoked.
    Input(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositeStep {
    pub kind: ActionKind,
    pub bindings: BTreeMap<String, Binding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeAction {
    pub composite_id: String,
    pub goal: String,
    #[serde(default)]
    pub preconditions: Vec<String>,
    pub steps: Vec<CompositeStep>,
    pub expected_output_pattern: String,
    #[serde(default)]
    pub inputs: Vec<String>,
    #[serde(default)]
    pub reliability: ReliabilityTable,
    #[serde(default)]
    pub revision_log: Vec<String>,
}

impl CompositeAction {
    /// First `(step, referenced_step)` whose output reference does not point
    /// strictly backwards.
    pub fn non_forward_reference(&self) -> Option<(usize, usize)> {
        self.steps.iter().enumerate().find_map(|(i, step)| {
            step.bindings.values().find_map(|b| match b {
                Binding::Output(j) if *j >= i => Some((i, *j)),
                _ => None,
            })
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeerProfile {
    pub peer_id: String,
    /// Expertise description per domain tag.
    #[serde(default)]
    pub expertise: BTreeMap<String, String>,
    #[serde(default)]
    pub reliability: ReliabilityTable,
    #[serde(default)]
    pub response_pattern_notes: Vec<String>,
    #[serde(default)]
    pub revision_log: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackEstimate {
    pub action_pattern: String,
    pub expected_outcome_note: String,
    pub support_count: usize,
}

/// The materialized cognition at one version.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CognitionState {
    #[serde(default)]
    pub tools: BTreeMap<String, ToolProfile>,
    #[serde(default)]
    pub skills: BTreeMap<String, SkillTemplate>,
    #[serde(default)]
    pub composites: BTreeMap<String, CompositeAction>,
    #[serde(default)]
    pub peers: BTreeMap<String, PeerProfile>,
    #[serde(default)]
    pub feedback: Vec<FeedbackEstimate>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevisionTarget {
    Tool(String),
    Skill(String),
    Composite(String),
    Peer(String),
}

impl fmt::Display for RevisionTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RevisionTarget::Tool(n) => write!(f, "tool {n}"),
            RevisionTarget::Skill(n) => write!(f, "skill {n}"),
            RevisionTarget::Composite(n) => write!(f, "composite {n}"),
            RevisionTarget::Peer(n) => write!(f, "peer {n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EditKind {
    AmendDescription,
    AddPrecondition,
    AddFailurePattern,
    AddExample,
    AdjustReliability,
    AddSkill,
    AddComposite,
    AmendPeerExpertise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "edit_kind")]
pub enum RevisionEdit {
    /// Whole-field replacement; the replaced text is archived on commit.
    AmendDescription {
        text: String,
        #[serde(default)]
        previous: Option<String>,
    },
    AddPrecondition {
        text: String,
    },
    AddFailurePattern {
        text: String,
    },
    AddExample {
        example: UsageExample,
    },
    AdjustReliability {
        domain_tag: String,
        success: bool,
    },
    AddSkill {
        skill: SkillTemplate,
    },
    AddComposite {
        composite: CompositeAction,
    },
    AmendPeerExpertise {
        domain_tag: String,
        text: String,
        #[serde(default)]
        previous: Option<String>,
    },
}

impl RevisionEdit {
    pub fn kind(&self) -> EditKind {
        match self {
            RevisionEdit::AmendDescription { .. } => EditKind::AmendDescription,
            RevisionEdit::AddPrecondition { .. } => EditKind::AddPrecondition,
            RevisionEdit::AddFailurePattern { .. } => EditKind::AddFailurePattern,
            RevisionEdit::AddExample { .. } => EditKind::AddExample,
            RevisionEdit::AdjustReliability { .. } => EditKind::AdjustReliability,
            RevisionEdit::AddSkill { .. } => EditKind::AddSkill,
            RevisionEdit::AddComposite { .. } => EditKind::AddComposite,
            RevisionEdit::AmendPeerExpertise { .. } => EditKind::AmendPeerExpertise,
        }
    }
}

/// A proposed or committed edit. `revision_id` is assigned on commit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Revision {
    pub revision_id: String,
    pub target: RevisionTarget,
    pub edit: RevisionEdit,
    pub provenance: Vec<StepRef>,
    pub committed: bool,
}

impl Revision {
    pub fn propose(target: RevisionTarget, edit: RevisionEdit, provenance: Vec<StepRef>) -> Self {
        Revision {
            revision_id: String::new(),
            target,
            edit,
            provenance,
            committed: false,
        }
    }

    pub fn edit_kind(&self) -> EditKind {
        self.edit.kind()
    }
}
