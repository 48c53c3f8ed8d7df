//! Elastic memory: every step is kept as a lossless raw record plus a
//! compressed summary. Before each selection a tri-valued selector decides
//! which form each step takes in working memory, the result is fitted to a
//! token budget, and contiguous step ranges can be folded into episodes.

mod assemble;
mod fold;
mod orchestrator;
mod pool;
mod selector;

use thiserror::Error;

use crate::model::TokenCount;

pub use assemble::{assemble_working_memory, EntryKind, MemoryEntry, WorkingMemory, NO_PRIOR_STEPS};
pub use fold::{mem_fold, retrieve_episodes, Episode, EpisodeSource};
pub use orchestrator::{EmoConfig, Orchestrator, OverflowStats};
pub use pool::{
    ingest_step, render_raw, MemoryPool, MemoryStats, OutcomeTag, StepRecord, StepSummary, SummarySource, Unit,
    POOL_FORMAT_VERSION,
};
pub use selector::{
    auto_fold_range, heuristic_decision, parse_selector_output, select_representations, Representation,
    SelectorDecision,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EmoError {
    #[error("step {got} ingested into a pool of {expected} steps")]
    IndexGap { expected: usize, got: usize },
    #[error("budget {budget} is below the newest entry's minimal size {needed}")]
    BudgetTooSmall { needed: TokenCount, budget: TokenCount },
    #[error("fold range {first}-{last} covers fewer than 2 steps")]
    RangeTooShort { first: usize, last: usize },
    #[error("fold range {first}-{last} overlaps episode {episode}")]
    RangeOverlap { first: usize, last: usize, episode: usize },
    #[error("fold range {first}-{last} exceeds a pool of {len} steps")]
    RangeOutOfBounds { first: usize, last: usize, len: usize },
    #[error("invalid selector decision: {0}")]
    InvalidDecision(String),
    #[error("malformed pool snapshot line {line}: {reason}")]
    MalformedSnapshot { line: usize, reason: String },
}
