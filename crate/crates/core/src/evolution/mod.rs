//! The slower of the two cycles: judges logged steps against their
//! intentions, turns the verdicts into validated cognition revisions, mines
//! recurring action chains into composites and distills skills from
//! successful episodes. It runs between execution batches, never beside a
//! live select.

mod align;
mod distill;
mod mine;
mod propose;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{CompletionBackend, GenerationLimits};
use crate::cognition::{CognitionStore, EditKind, Revision, RevisionEdit, RevisionTarget, Validation};
use crate::emo::OverflowStats;
use crate::model::{StepRef, Trajectory};

pub use align::{align, align_corpus, AlignmentVerdict, Verdict};
pub use distill::distill_skill;
pub use mine::{mine_composites, mineable, MinedComposite};
pub use propose::{propose_revisions, STRONG_NOTE, WEAK_NOTE};

pub type Verdicts = BTreeMap<StepRef, AlignmentVerdict>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvolutionError {
    #[error("episode step {0} was not judged successful")]
    EpisodeNotSuccessful(StepRef),
    #[error("mining needs min_support >= 2 and 2 <= max_len <= 6 (got {min_support}, {max_len})")]
    InvalidMiningParameters { min_support: usize, max_len: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionConfig {
    /// Violated steps sharing an error prefix before a failure pattern is
    /// proposed.
    pub failure_pattern_threshold: usize,
    pub failure_prefix_words: usize,
    pub examples_per_tool: usize,
    pub peer_high_threshold: f64,
    pub peer_low_threshold: f64,
    pub min_support: usize,
    pub min_success: f64,
    pub max_len: usize,
    pub overflow_rate_trigger: f64,
    pub fold_threshold_step: usize,
    pub min_fold_threshold: usize,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            failure_pattern_threshold: 3,
            failure_prefix_words: 3,
            examples_per_tool: 2,
            peer_high_threshold: 0.8,
            peer_low_threshold: 0.3,
            min_support: 3,
            min_success: 0.8,
            max_len: 4,
            overflow_rate_trigger: 0.2,
            fold_threshold_step: 2,
            min_fold_threshold: 4,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub committed: usize,
    pub committed_by_kind: BTreeMap<EditKind, usize>,
    pub rejected: usize,
    /// Rejection reasons, rendered.
    pub rejected_by_reason: BTreeMap<String, usize>,
    pub verdicts: BTreeMap<Verdict, usize>,
    pub mined: usize,
    pub version_before: u64,
    pub version_after: u64,
}

impl CycleReport {
    fn offer(&mut self, store: &mut CognitionStore, revision: Revision) {
        match store.validate(&revision) {
            Validation::Accepted => {
                let kind = revision.edit_kind();
                if store.commit(revision).is_ok() {
                    self.committed += 1;
                    *self.committed_by_kind.entry(kind).or_default() += 1;
                }
            }
            Validation::Rejected(reason) => {
                self.rejected += 1;
                let key = reason.to_string();
                *self.rejected_by_reason.entry(key).or_default() += 1;
            }
        }
    }

    /// One line per edit kind, then totals.
    pub fn render(&self) -> String {
        let mut lines = vec![format!(
            "cognition version {} -> {}",
            self.version_before, self.version_after
        )];
        for (kind, n) in &self.committed_by_kind {
            lines.push(format!("{kind:?}: {n}"));
        }
        lines.push(format!("committed: {}", self.committed));
        lines.push(format!("rejected: {}", self.rejected));
        for (reason, n) in &self.rejected_by_reason {
            lines.push(format!("  {reason}: {n}"));
        }
        lines.push(format!("mined composites: {}", self.mined));
        lines.join("\n")
    }
}

/// Align, propose and commit, then mine and commit. Re-running on the same
/// corpus commits nothing: reliability evidence is keyed by step and every
/// other edit is rejected as a duplicate.
pub fn evolution_cycle(
    corpus: &[Trajectory],
    store: &mut CognitionStore,
    analyzer: Option<&dyn CompletionBackend>,
    config: &EvolutionConfig,
    limits: GenerationLimits,
) -> Result<CycleReport, EvolutionError> {
    let mut report = CycleReport {
        version_before: store.version(),
        ..CycleReport::default()
    };
    let verdicts = align_corpus(corpus, analyzer, limits);
    for v in verdicts.values() {
        *report.verdicts.entry(v.verdict).or_default() += 1;
    }
    for revision in propose_revisions(store, corpus, &verdicts, config) {
        report.offer(store, revision);
    }
    let mined = mine_composites(corpus, &verdicts, config.min_support, config.min_success, config.max_len)?;
    report.mined = mined.len();
    for m in mined {
        let revision = Revision::propose(
            RevisionTarget::Composite(m.candidate.composite_id.clone()),
            RevisionEdit::AddComposite { composite: m.candidate },
            m.provenance,
        );
        report.offer(store, revision);
    }
    report.version_after = store.version();
    Ok(report)
}

/// The one memory-policy knob evolution may turn: fold earlier when
/// assemblies overflow their budget too often.
pub fn tune_fold_threshold(current: usize, stats: &OverflowStats, config: &EvolutionConfig) -> usize {
    if stats.overflow_rate() > config.overflow_rate_trigger {
        current
            .saturating_sub(config.fold_threshold_step)
            .max(config.min_fold_threshold.min(current))
    } else {
        current
    }
}
