//! OpenAI-compatible chat-completions client with capped exponential
//! backoff on transient failures.

use std::fmt;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BackendError, Completion, CompletionBackend, CompletionRequest, Role};
use crate::model::{token_count, Usage};

/// Environment variable that overrides the configured API key.
pub const API_KEY_ENV: &str = "COGLOOP_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(250),
            max_delay: Duration::from_secs(4),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (1-based).
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32 << (attempt.saturating_sub(1)).min(16);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpSettings {
    /// Base URL, e.g. `https://api.example.com`; `/v1/chat/completions` is appended.
    pub endpoint: String,
    pub model: String,
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_timeout_secs() -> u64 {
    120
}

impl fmt::Debug for HttpSettings {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpSettings")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("timeout_secs", &self.timeout_secs)
            .finish()
    }
}

impl HttpSettings {
    /// Applies the environment override for the API key.
    pub fn resolve_api_key(mut self) -> Self {
        if let Ok(key) = std::env::var(API_KEY_ENV) {
            if !key.is_empty() {
                self.api_key = Some(key);
            }
        }
        self
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: Role,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    max_tokens: u32,
    temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    stop: Option<&'a [String]>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
    #[serde(default)]
    usage: Option<ChatUsage>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct ChatUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

pub struct HttpBackend {
    settings: HttpSettings,
    retry: RetryPolicy,
    client: reqwest::blocking::Client,
}

impl fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpBackend")
            .field("settings", &self.settings)
            .field("retry", &self.retry)
            .finish()
    }
}

enum Attempt {
    Done(Completion),
    Retry(BackendError),
    Fatal(BackendError),
}

impl HttpBackend {
    pub fn new(settings: HttpSettings) -> Result<Self, BackendError> {
        Self::with_retry(settings, RetryPolicy::default())
    }

    pub fn with_retry(settings: HttpSettings, retry: RetryPolicy) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(settings.timeout_secs))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(HttpBackend {
            settings,
            retry,
            client,
        })
    }

    pub fn url(&self) -> String {
        format!("{}/v1/chat/completions", self.settings.endpoint.trim_end_matches('/'))
    }

    /// Exact bytes sent as the request body.
    pub fn request_body(&self, request: &CompletionRequest) -> Vec<u8> {
        let body = ChatRequest {
            model: &self.settings.model,
            messages: request
                .messages
                .iter()
                .map(|m| ChatMessage {
                    role: m.role,
                    content: &m.content,
                })
                .collect(),
            max_tokens: request.max_tokens,
            temperature: request.temperature,
            stop: request.stop.as_deref(),
        };
        serde_json::to_vec(&body).expect("request body serializes")
    }

    fn attempt(&self, request: &CompletionRequest, body: &[u8]) -> Attempt {
        let mut builder = self
            .client
            .post(self.url())
            .header("content-type", "application/json")
            .body(body.to_vec());
        if let Some(key) = &self.settings.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = match builder.send() {
            Ok(response) => response,
            Err(e) => return Attempt::Retry(BackendError::Transport(e.to_string())),
        };
        let status = response.status().as_u16();
        let text = match response.text() {
            Ok(text) => text,
            Err(e) => return Attempt::Retry(BackendError::Transport(e.to_string())),
        };
        if status == 429 || status >= 500 {
            return Attempt::Retry(BackendError::Provider { status, body: text });
        }
        if !(200..300).contains(&status) {
            return Attempt::Fatal(BackendError::Provider { status, body: text });
        }
        let parsed: ChatResponse = match serde_json::from_str(&text) {
            Ok(parsed) => parsed,
            Err(e) => {
                return Attempt::Fatal(BackendError::Provider {
                    status,
                    body: format!("unparsable response ({e}): {text}"),
                })
            }
        };
        let Some(content) = parsed.choices.into_iter().next().and_then(|c| c.message.content) else {
            return Attempt::Fatal(BackendError::Provider {
                status,
                body: format!("response has no message content: {text}"),
            });
        };
        let usage = parsed
            .usage
            .map(|u| Usage {
                prompt_tokens: u.prompt_tokens,
                completion_tokens: u.completion_tokens,
            })
            .unwrap_or_else(|| Usage {
                prompt_tokens: token_count(&request.prompt_text()).get(),
                completion_tokens: token_count(&content).get(),
            });
        Attempt::Done(Completion { text: content, usage })
    }
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, BackendError> {
        request.validate()?;
        let body = self.request_body(request);
        let mut attempt = 1;
        loop {
            match self.attempt(request, &body) {
                Attempt::Done(completion) => return Ok(completion),
                Attempt::Fatal(err) => return Err(err),
                Attempt::Retry(err) if attempt >= self.retry.max_attempts => return Err(err),
                Attempt::Retry(_) => {
                    thread::sleep(self.retry.delay(attempt));
                    attempt += 1;
                }
            }
        }
    }
}
