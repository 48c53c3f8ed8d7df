//! Batch harness for the cogloop runtime: configuration, suite execution,
//! run directories, replay verification, ablations and the offline
//! evolution step.

pub mod ablate;
pub mod config;
pub mod evolve;
pub mod inspect;
pub mod metrics;
pub mod replay;
pub mod report;
pub mod suite;

use thiserror::Error;

use cogloop_core::backend::BackendError;
use cogloop_core::cognition::CognitionError;
use cogloop_core::emo::EmoError;
use cogloop_core::evolution::EvolutionError;
use cogloop_core::model::LogError;
use cogloop_core::world::WorldError;

pub use config::{BackendKind, ConfigError, HarnessConfig};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Cognition(#[from] CognitionError),
    #[error(transparent)]
    Memory(#[from] EmoError),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("{path}:{line}: {reason}")]
    MalformedLine { path: String, line: usize, reason: String },
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("{0}")]
    Invalid(String),
}

impl HarnessError {
    pub fn io(path: &std::path::Path, e: impl ToString) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        }
    }
}

pub(crate) fn read(path: &std::path::Path) -> Result<Vec<u8>, HarnessError> {
    std::fs::read(path).map_err(|e| HarnessError::io(path, e))
}

pub(crate) fn write(path: &std::path::Path, bytes: &[u8]) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
