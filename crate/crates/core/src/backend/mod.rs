//! Completion backends.
//!
//! Every LLM-touching operation goes through [`CompletionBackend`]. Two
//! implementations ship: [`ScriptedBackend`], a deterministic table/policy
//! driven responder used for tests and replay, and [`HttpBackend`], a client
//! for OpenAI-compatible `/v1/chat/completions` endpoints.

mod http;
mod policy;
mod scripted;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{token_count, Usage, DEFAULT_MAX_GENERATION_TOKENS, DEFAULT_TEMPERATURE};

pub use http::{HttpBackend, HttpSettings, RetryPolicy, API_KEY_ENV};
pub use policy::ScriptPolicy;
pub use scripted::{ScriptedBackend, ScriptedScenario};

/// Which operation issued a request. Scripted scenarios are addressed by
/// (call site, occurrence).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CallSite {
    Select,
    Compress,
    Selector,
    Fold,
    Align,
    Distill,
    Generate,
}

impl fmt::Display for CallSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            CallSite::Select => "select",
            CallSite::Compress => "compress",
            CallSite::Selector => "selector",
            CallSite::Fold => "fold",
            CallSite::Align => "align",
            CallSite::Distill => "distill",
            CallSite::Generate => "generate",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Message {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// Generation limits shared by every call an agent makes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationLimits {
    pub max_tokens: u32,
    pub temperature: f64,
}

impl Default for GenerationLimits {
    fn default() -> Self {
        GenerationLimits {
            max_tokens: DEFAULT_MAX_GENERATION_TOKENS,
            temperature: DEFAULT_TEMPERATURE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub call_site: CallSite,
    pub messages: Vec<Message>,
    pub max_tokens: u32,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<Vec<String>>,
}

impl CompletionRequest {
    pub fn new(call_site: CallSite, prompt: impl Into<String>, limits: GenerationLimits) -> Self {
        CompletionRequest {
            call_site,
            messages: vec![Message::user(prompt)],
            max_tokens: limits.max_tokens,
            temperature: limits.temperature,
            stop: None,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.max_tokens < 1 {
            return Err(BackendError::InvalidRequest("max_tokens must be >= 1".into()));
        }
        if self.messages.is_empty() {
            return Err(BackendError::InvalidRequest("no messages".into()));
        }
        Ok(())
    }

    /// All message contents joined by newlines; what token accounting sees.
    pub fn prompt_text(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Content of the first message, where single-turn prompts live.
    pub fn first_prompt(&self) -> &str {
        self.messages.first().map(|m| m.content.as_str()).unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub usage: Usage,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("scripted scenario exhausted at {call_site} call #{occurrence}")]
    ScenarioExhausted { call_site: CallSite, occurrence: usize },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider returned {status}: {body}")]
    Provider { status: u16, body: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

pub trait CompletionBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, BackendError>;
}

impl<T: CompletionBackend + ?Sized> CompletionBackend for &T {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, BackendError> {
        (**self).complete(request)
    }
}

impl<T: CompletionBackend + ?Sized> CompletionBackend for std::sync::Arc<T> {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, BackendError> {
        (**self).complete(request)
    }
}

/// Wraps a backend and accumulates usage per call site. Failed calls still
/// count their prompt, since it was sent.
pub struct MeteredBackend<B> {
    inner: B,
    usage: Mutex<BTreeMap<CallSite, Usage>>,
}

impl<B: CompletionBackend> MeteredBackend<B> {
    pub fn new(inner: B) -> Self {
        MeteredBackend {
            inner,
            usage: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn usage_by_site(&self) -> BTreeMap<CallSite, Usage> {
        self.usage.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn total_usage(&self) -> Usage {
        let mut total = Usage::default();
        for usage in self.usage_by_site().values() {
            total.add(*usage);
        }
        total
    }
}

impl<B: CompletionBackend> CompletionBackend for MeteredBackend<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, BackendError> {
        let result = self.inner.complete(request);
        let spent = match &result {
            Ok(completion) => completion.usage,
            Err(_) => Usage {
                prompt_tokens: token_count(&request.prompt_text()).get(),
                completion_tokens: 0,
            },
        };
        self.usage
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .entry(request.call_site)
            .or_default()
            .add(spent);
        result
    }
}

/// A backend that is always unavailable; forces every caller onto its
/// deterministic fallback.
#[derive(Debug, Clone, Copy, Default)]
pub struct OfflineBackend;

impl CompletionBackend for OfflineBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, BackendError> {
        Err(BackendError::ScenarioExhausted {
            call_site: request.call_site,
            occurrence: 0,
        })
    }
}
