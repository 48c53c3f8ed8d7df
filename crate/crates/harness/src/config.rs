//! Run configuration files (TOML).
//!
//! ```toml
//! memory_budget = 2048   # required
//! seed = 7               # required
//! max_steps = 5
//! embodied_max_steps = 50
//! max_generation_tokens = 1024
//! temperature = 0.7
//! backend = "scripted"   # or "http", which needs an [http] table
//! parallel_workers = 1
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use cogloop_core::backend::HttpSettings;
use cogloop_core::evolution::EvolutionConfig;
use cogloop_core::model::{
    RunConfig, SelectorMode, TaskSpec, TokenCount, DEFAULT_DELEGATION_DEPTH_CAP, DEFAULT_EMBODIED_MAX_STEPS,
    DEFAULT_FOLD_THRESHOLD, DEFAULT_MAX_GENERATION_TOKENS, DEFAULT_MAX_STEPS, DEFAULT_TEMPERATURE,
};

const REQUIRED: [&str; 2] = ["memory_budget", "seed"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("missing config key `{0}`")]
    MissingKey(String),
    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("unsupported {what} `{value}`")]
    Unsupported { what: String, value: String },
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("cannot parse {path}: {reason}")]
    Parse { path: String, reason: String },
}

impl ConfigError {
    pub fn io(path: &Path, e: impl ToString) -> Self {
        ConfigError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        }
    }

    pub fn parse(path: &Path, e: impl ToString) -> Self {
        ConfigError::Parse {
            path: path.display().to_string(),
            reason: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Scripted,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessConfig {
    pub memory_budget: u64,
    pub seed: u64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_embodied_max_steps")]
    pub embodied_max_steps: usize,
    #[serde(default = "default_max_generation_tokens")]
    pub max_generation_tokens: u32,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_backend")]
    pub backend: BackendKind,
    #[serde(default = "default_workers")]
    pub parallel_workers: usize,
    #[serde(default = "default_true")]
    pub emo_enabled: bool,
    #[serde(default = "default_fold_threshold")]
    pub fold_threshold: usize,
    #[serde(default = "default_selector")]
    pub selector: SelectorMode,
    #[serde(default = "default_depth_cap")]
    pub delegation_depth_cap: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub http: Option<HttpSettings>,
    #[serde(default)]
    pub evolution: EvolutionConfig,
}

fn default_max_steps() -> usize {
    DEFAULT_MAX_STEPS
}
fn default_embodied_max_steps() -> usize {
    DEFAULT_EMBODIED_MAX_STEPS
}
fn default_max_generation_tokens() -> u32 {
    DEFAULT_MAX_GENERATION_TOKENS
}
fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE
}
fn default_backend() -> BackendKind {
    BackendKind::Scripted
}
fn default_workers() -> usize {
    1
}
fn default_true() -> bool {
    true
}
fn default_fold_threshold() -> usize {
    DEFAULT_FOLD_THRESHOLD
}
fn default_selector() -> SelectorMode {
    SelectorMode::Backend
}
fn default_depth_cap() -> usize {
    DEFAULT_DELEGATION_DEPTH_CAP
}

impl HarnessConfig {
    /// Defaults for everything but the two required keys.
    pub fn new(memory_budget: u64, seed: u64) -> Self {
        HarnessConfig {
            memory_budget,
            seed,
            max_steps: DEFAULT_MAX_STEPS,
            embodied_max_steps: DEFAULT_EMBODIED_MAX_STEPS,
            max_generation_tokens: DEFAULT_MAX_GENERATION_TOKENS,
            temperature: DEFAULT_TEMPERATURE,
            backend: BackendKind::Scripted,
            parallel_workers: 1,
            emo_enabled: true,
            fold_threshold: DEFAULT_FOLD_THRESHOLD,
            selector: SelectorMode::Backend,
            delegation_depth_cap: DEFAULT_DELEGATION_DEPTH_CAP,
            http: None,
            evolution: EvolutionConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse {
            path: "config".into(),
            reason: e.message().to_string(),
        })?;
        for key in REQUIRED {
            if !table.contains_key(key) {
                return Err(ConfigError::MissingKey(key.to_string()));
            }
        }
        if table.get("backend").and_then(|v| v.as_str()) == Some("http") {
            let http = table.get("http").and_then(|v| v.as_table());
            for key in ["endpoint", "model"] {
                if !http.is_some_and(|h| h.contains_key(key)) {
                    return Err(ConfigError::MissingKey(format!("http.{key}")));
                }
            }
        }
        if let Some(backend) = table.get("backend").and_then(|v| v.as_str()) {
            if !matches!(backend, "scripted" | "http") {
                return Err(ConfigError::Unsupported {
                    what: "backend".into(),
                    value: backend.into(),
                });
            }
        }
        let config: HarnessConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| {
            ConfigError::InvalidValue {
                key: error_key(e.message()),
                reason: e.message().to_string(),
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            ConfigError::Parse { reason, .. } => ConfigError::parse(path, reason),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key: &str, reason: &str| {
            Err(ConfigError::InvalidValue {
                key: key.into(),
                reason: reason.into(),
            })
        };
        if self.max_steps < 1 {
            return invalid("max_steps", "must be at least 1");
        }
        if self.embodied_max_steps < 1 {
            return invalid("embodied_max_steps", "must be at least 1");
        }
        if self.max_generation_tokens < 1 {
            return invalid("max_generation_tokens", "must be at least 1");
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return invalid("temperature", "must lie in [0, 2]");
        }
        if self.parallel_workers < 1 {
            return invalid("parallel_workers", "must be at least 1");
        }
        Ok(())
    }

    /// The run config a task executes under; embodied tasks get the longer
    /// step cap.
    pub fn run_config(&self, task: &TaskSpec) -> RunConfig {
        RunConfig {
            max_steps: if task.embodied {
                self.embodied_max_steps
            } else {
                self.max_steps
            },
            max_generation_tokens: self.max_generation_tokens,
            temperature: self.temperature,
            memory_budget: TokenCount(self.memory_budget),
            seed: self.seed,
            emo_enabled: self.emo_enabled,
            fold_threshold: self.fold_threshold,
            selector: self.selector,
            delegation_depth_cap: self.delegation_depth_cap,
        }
    }
}

/// The key a serde message is about, when it names one.
fn error_key(message: &str) -> String {
    for marker in ["unknown field `", "missing field `"] {
        if let Some(rest) = message.split(marker).nth(1) {
            if let Some(key) = rest.split('`').next() {
                return key.to_string();
            }
        }
    }
    "config".to_string()
}
