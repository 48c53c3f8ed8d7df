use serde::{Deserialize, Serialize};

use super::assemble::{assemble_working_memory, EntryKind, MemoryEntry, WorkingMemory};
use super::fold::mem_fold;
use super::pool::{ingest_step, MemoryPool, StepRecord, SummarySource};
use super::selector::{auto_fold_range, heuristic_decision, select_representations};
use super::EmoError;
use crate::backend::{CompletionBackend, GenerationLimits};
use crate::model::{ActionRecord, RunConfig, SelectorMode, TokenCount};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmoConfig {
    /// When off, working memory is the plain concatenation of raw records.
    pub enabled: bool,
    pub budget: TokenCount,
    pub fold_threshold: usize,
    pub selector: SelectorMode,
    pub limits: GenerationLimits,
}

impl EmoConfig {
    pub fn from_run_config(config: &RunConfig) -> Self {
        EmoConfig {
            enabled: config.emo_enabled,
            budget: config.memory_budget,
            fold_threshold: config.fold_threshold,
            selector: config.selector,
            limits: GenerationLimits {
                max_tokens: config.max_generation_tokens,
                temperature: config.temperature,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverflowStats {
    pub assemblies: u64,
    pub overflows: u64,
    pub folds: u64,
    pub budget_too_small: u64,
}

impl OverflowStats {
    pub fn add(&mut self, other: OverflowStats) {
        self.assemblies += other.assemblies;
        self.overflows += other.overflows;
        self.folds += other.folds;
        self.budget_too_small += other.budget_too_small;
    }

    /// Fraction of assemblies that had to degrade to fit the budget.
    pub fn overflow_rate(&self) -> f64 {
        if self.assemblies == 0 {
            0.0
        } else {
            self.overflows as f64 / self.assemblies as f64
        }
    }
}

/// Per-agent memory front end: ingests steps and produces the working
/// memory for each selection.
#[derive(Debug, Clone)]
pub struct Orchestrator {
    pool: MemoryPool,
    config: EmoConfig,
    stats: OverflowStats,
}

impl Orchestrator {
    pub fn new(config: EmoConfig) -> Self {
        Orchestrator {
            pool: MemoryPool::new(),
            config,
            stats: OverflowStats::default(),
        }
    }

    pub fn pool(&self) -> &MemoryPool {
        &self.pool
    }

    pub fn into_pool(self) -> MemoryPool {
        self.pool
    }

    pub fn stats(&self) -> OverflowStats {
        self.stats
    }

    pub fn ingest(&mut self, record: &ActionRecord, backend: &dyn CompletionBackend) -> Result<SummarySource, EmoError> {
        let compressor = self.config.enabled.then_some(backend);
        ingest_step(&mut self.pool, StepRecord::from_action(record), compressor, self.config.limits)
    }

    pub fn working_memory(&mut self, task_context: &str, backend: &dyn CompletionBackend) -> WorkingMemory {
        if !self.config.enabled {
            return self.raw_concatenation();
        }
        if self.pool.is_empty() {
            return WorkingMemory {
                budget: self.config.budget,
                ..WorkingMemory::default()
            };
        }
        let decision = match self.config.selector {
            SelectorMode::Backend => select_representations(
                &self.pool,
                task_context,
                Some(backend),
                self.config.limits,
                self.config.fold_threshold,
            ),
            SelectorMode::Heuristic => {
                let mut d = heuristic_decision(&self.pool);
                d.fold = auto_fold_range(&self.pool, self.config.fold_threshold);
                d
            }
        };
        if let Some(range) = decision.fold {
            if mem_fold(&mut self.pool, range, Some(backend), self.config.limits).is_ok() {
                self.stats.folds += 1;
            }
        }
        self.stats.assemblies += 1;
        match assemble_working_memory(&self.pool, &decision, self.config.budget) {
            Ok(wm) => {
                if wm.overflowed() {
                    self.stats.overflows += 1;
                }
                wm
            }
            Err(_) => {
                // the budget cannot hold even the newest step; select blind
                self.stats.overflows += 1;
                self.stats.budget_too_small += 1;
                WorkingMemory {
                    budget: self.config.budget,
                    ..WorkingMemory::default()
                }
            }
        }
    }

    fn raw_concatenation(&self) -> WorkingMemory {
        let entries: Vec<MemoryEntry> = self
            .pool
            .records()
            .map(|r| MemoryEntry {
                kind: EntryKind::Raw,
                position: r.step_index,
                label: format!("[step {} | raw]", r.step_index),
                text: r.raw_text.clone(),
                tokens: r.raw_tokens,
            })
            .collect();
        let total: TokenCount = entries.iter().map(|e| e.tokens).sum();
        WorkingMemory {
            entries,
            total_tokens: total,
            budget: total,
            requested_tokens: total,
        }
    }
}
