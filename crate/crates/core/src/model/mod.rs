//! Shared domain types: tasks, actions, outcomes, trajectories and the
//! run configuration every other module reads.

mod log;
mod tokens;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use log::{deserialize_trajectory, serialize_trajectory, LogError, FORMAT_VERSION};
pub use tokens::{first_words, token_count, truncate_to_tokens, TokenCount};

pub type Parameters = BTreeMap<String, String>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("record step_index {got} does not follow trajectory length {expected}")]
    IndexGap { expected: usize, got: usize },
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("invalid run config: {0}")]
    InvalidConfig(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    pub instruction: String,
    #[serde(default)]
    pub domain_tags: BTreeSet<String>,
    /// Near-optimal action-name sequence used for path similarity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_path: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_answer: Option<String>,
    /// Embodied tasks run in the mini environment under the longer step cap.
    #[serde(default)]
    pub embodied: bool,
}

impl TaskSpec {
    pub fn new(task_id: impl Into<String>, instruction: impl Into<String>) -> Self {
        TaskSpec {
            task_id: task_id.into(),
            instruction: instruction.into(),
            domain_tags: BTreeSet::new(),
            reference_path: None,
            gold_answer: None,
            embodied: false,
        }
    }

    pub fn with_tags<I, S>(mut self, tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.domain_tags = tags.into_iter().map(Into::into).collect();
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.task_id.trim().is_empty() {
            return Err(ModelError::InvalidTask("task_id is empty".into()));
        }
        if self.instruction.trim().is_empty() {
            return Err(ModelError::InvalidTask(format!(
                "task {} has an empty instruction",
                self.task_id
            )));
        }
        Ok(())
    }

    /// Domain tags used for reliability bookkeeping; untagged tasks fall
    /// under `general`.
    pub fn reliability_tags(&self) -> Vec<String> {
        if self.domain_tags.is_empty() {
            vec![GENERAL_TAG.to_string()]
        } else {
            self.domain_tags.iter().cloned().collect()
        }
    }
}

pub const GENERAL_TAG: &str = "general";

/// A selectable action. Targets are carried by the variants that need one.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "variant", content = "target")]
pub enum ActionKind {
    EmicGenerate,
    EmicToolCall(String),
    EmicSkillInvoke(String),
    EmicCompositeInvoke(String),
    EticAsk(String),
    EticDelegate(String),
    FinalAnswer,
}

pub const GENERATE_ACTION: &str = "Generate";
pub const FINAL_ANSWER_ACTION: &str = "FinalAnswer";

impl ActionKind {
    /// The name under which the action is offered and selected.
    pub fn name(&self) -> String {
        match self {
            ActionKind::EmicGenerate => GENERATE_ACTION.to_string(),
            ActionKind::EmicToolCall(tool) => tool.clone(),
            ActionKind::EmicSkillInvoke(id) => format!("skill:{id}"),
            ActionKind::EmicCompositeInvoke(id) => format!("composite:{id}"),
            ActionKind::EticAsk(peer) => format!("ask:{peer}"),
            ActionKind::EticDelegate(peer) => format!("delegate:{peer}"),
            ActionKind::FinalAnswer => FINAL_ANSWER_ACTION.to_string(),
        }
    }

    pub fn target(&self) -> Option<&str> {
        match self {
            ActionKind::EmicGenerate | ActionKind::FinalAnswer => None,
            ActionKind::EmicToolCall(t)
            | ActionKind::EmicSkillInvoke(t)
            | ActionKind::EmicCompositeInvoke(t)
            | ActionKind::EticAsk(t)
            | ActionKind::EticDelegate(t) => Some(t),
        }
    }

    pub fn is_etic(&self) -> bool {
        matches!(self, ActionKind::EticAsk(_) | ActionKind::EticDelegate(_))
    }

    /// Position in the fixed kind order of the action space.
    pub fn rank(&self) -> u8 {
        match self {
            ActionKind::EmicGenerate => 0,
            ActionKind::EmicToolCall(_) => 1,
            ActionKind::EmicSkillInvoke(_) => 2,
            ActionKind::EmicCompositeInvoke(_) => 3,
            ActionKind::EticAsk(_) => 4,
            ActionKind::EticDelegate(_) => 5,
            ActionKind::FinalAnswer => 6,
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OutcomeStatus {
    Success,
    ToolError,
    ParseError,
    PeerResponse,
    Timeout,
    CapExceeded,
}

impl OutcomeStatus {
    pub fn is_error(self) -> bool {
        matches!(
            self,
            OutcomeStatus::ToolError | OutcomeStatus::ParseError | OutcomeStatus::Timeout
        )
    }
}

impl fmt::Display for OutcomeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// What a step produced. `error_detail` is present exactly for the error
/// statuses; the payload is empty only for `CapExceeded`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub status: OutcomeStatus,
    pub payload: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_detail: Option<String>,
}

const EMPTY_PAYLOAD: &str = "(empty)";

fn non_empty(text: impl Into<String>) -> String {
    let text = text.into();
    if text.is_empty() {
        EMPTY_PAYLOAD.to_string()
    } else {
        text
    }
}

impl Outcome {
    pub fn success(payload: impl Into<String>) -> Self {
        Outcome {
            status: OutcomeStatus::Success,
            payload: non_empty(payload),
            error_detail: None,
        }
    }

    pub fn peer(payload: impl Into<String>) -> Self {
        Outcome {
            status: OutcomeStatus::PeerResponse,
            payload: non_empty(payload),
            error_detail: None,
        }
    }

    fn error(status: OutcomeStatus, detail: impl Into<String>) -> Self {
        let detail = non_empty(detail);
        Outcome {
            status,
            payload: detail.clone(),
            error_detail: Some(detail),
        }
    }

    pub fn tool_error(detail: impl Into<String>) -> Self {
        Self::error(OutcomeStatus::ToolError, detail)
    }

    pub fn parse_error(detail: impl Into<String>) -> Self {
        Self::error(OutcomeStatus::ParseError, detail)
    }

    pub fn timeout(detail: impl Into<String>) -> Self {
        Self::error(OutcomeStatus::Timeout, detail)
    }

    pub fn cap_exceeded(note: impl Into<String>) -> Self {
        Outcome {
            status: OutcomeStatus::CapExceeded,
            payload: note.into(),
            error_detail: None,
        }
    }

    pub fn is_error(&self) -> bool {
        self.status.is_error()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.status.is_error() != self.error_detail.is_some() {
            return Err(ModelError::InvalidRecord(format!(
                "error_detail presence does not match status {}",
                self.status
            )));
        }
        if self.payload.is_empty() && self.status != OutcomeStatus::CapExceeded {
            return Err(ModelError::InvalidRecord(format!(
                "empty payload for status {}",
                self.status
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub step_index: usize,
    pub intention: String,
    pub kind: ActionKind,
    pub parameters: Parameters,
    pub outcome: Outcome,
    pub start_tick: u64,
    pub end_tick: u64,
}

/// (task, step) coordinates of a logged step; the unit of provenance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StepRef {
    pub task_id: String,
    pub step_index: usize,
}

impl StepRef {
    pub fn new(task_id: impl Into<String>, step_index: usize) -> Self {
        StepRef {
            task_id: task_id.into(),
            step_index,
        }
    }
}

impl fmt::Display for StepRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.task_id, self.step_index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FinalStatus {
    Solved,
    Failed,
    CapHit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectorMode {
    /// Ask the completion backend, falling back to the recency heuristic.
    Backend,
    Heuristic,
}

/// Resolved per-run settings, snapshotted into every trajectory log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub max_steps: usize,
    pub max_generation_tokens: u32,
    pub temperature: f64,
    pub memory_budget: TokenCount,
    pub seed: u64,
    pub emo_enabled: bool,
    pub fold_threshold: usize,
    pub selector: SelectorMode,
    pub delegation_depth_cap: usize,
}

pub const DEFAULT_MAX_STEPS: usize = 5;
pub const DEFAULT_EMBODIED_MAX_STEPS: usize = 50;
pub const DEFAULT_MAX_GENERATION_TOKENS: u32 = 1024;
pub const DEFAULT_TEMPERATURE: f64 = 0.7;
pub const DEFAULT_FOLD_THRESHOLD: usize = 12;
pub const DEFAULT_DELEGATION_DEPTH_CAP: usize = 2;

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            max_steps: DEFAULT_MAX_STEPS,
            max_generation_tokens: DEFAULT_MAX_GENERATION_TOKENS,
            temperature: DEFAULT_TEMPERATURE,
            memory_budget: TokenCount(2048),
            seed: 0,
            emo_enabled: true,
            fold_threshold: DEFAULT_FOLD_THRESHOLD,
            selector: SelectorMode::Backend,
            delegation_depth_cap: DEFAULT_DELEGATION_DEPTH_CAP,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.max_steps < 1 {
            return Err(ModelError::InvalidConfig("max_steps must be >= 1".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ModelError::InvalidConfig(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_generation_tokens < 1 {
            return Err(ModelError::InvalidConfig(
                "max_generation_tokens must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl Usage {
    pub fn add(&mut self, other: Usage) {
        self.prompt_tokens += other.prompt_tokens;
        self.completion_tokens += other.completion_tokens;
    }
}

/// The append-only record of one task run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub task: TaskSpec,
    pub records: Vec<ActionRecord>,
    pub final_status: FinalStatus,
    pub final_answer: Option<String>,
    pub config_snapshot: RunConfig,
    pub cognition_version: u64,
    pub usage: Usage,
}

impl Trajectory {
    /// An empty trajectory; `final_status` stays `Failed` until [`finish`].
    ///
    /// [`finish`]: Trajectory::finish
    pub fn begin(task: TaskSpec, config: RunConfig, cognition_version: u64) -> Self {
        Trajectory {
            task,
            records: Vec::new(),
            final_status: FinalStatus::Failed,
            final_answer: None,
            config_snapshot: config,
            cognition_version,
            usage: Usage::default(),
        }
    }

    pub fn append_record(&mut self, record: ActionRecord) -> Result<(), ModelError> {
        if record.step_index != self.records.len() {
            return Err(ModelError::IndexGap {
                expected: self.records.len(),
                got: record.step_index,
            });
        }
        if record.intention.trim().is_empty() {
            return Err(ModelError::InvalidRecord(format!(
                "step {} has an empty intention",
                record.step_index
            )));
        }
        record.outcome.validate()?;
        self.records.push(record);
        Ok(())
    }

    pub fn finish(&mut self, status: FinalStatus, answer: Option<String>) {
        self.final_status = status;
        self.final_answer = answer;
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn action_names(&self) -> Vec<String> {
        self.records.iter().map(|r| r.kind.name()).collect()
    }

    pub fn executed_final_answer(&self) -> bool {
        self.records
            .iter()
            .any(|r| r.kind == ActionKind::FinalAnswer && r.outcome.status == OutcomeStatus::Success)
    }
}

/// Declared parameter of an action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default = "default_true")]
    pub required: bool,
}

fn default_true() -> bool {
    true
}

impl ParamSpec {
    pub fn required(name: impl Into<String>, description: impl Into<String>) -> Self {
        ParamSpec {
            name: name.into(),
            description: description.into(),
            required: true,
        }
    }

    pub fn optional(name: impl Into<String>, description: impl Into<String>) -> Self {
        ParamSpec {
            name: name.into(),
            description: description.into(),
            required: false,
        }
    }
}
