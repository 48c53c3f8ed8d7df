use serde::{Deserialize, Serialize};

use super::pool::{MemoryPool, Unit};
use super::selector::{Representation, SelectorDecision};
use super::EmoError;
use crate::model::TokenCount;

pub const NO_PRIOR_STEPS: &str = "no prior steps";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Raw,
    Summary,
    Episode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub kind: EntryKind,
    /// First covered step; entries are sorted by it.
    pub position: usize,
    pub label: String,
    pub text: String,
    pub tokens: TokenCount,
}

/// The budgeted context handed to selection.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WorkingMemory {
    pub entries: Vec<MemoryEntry>,
    pub total_tokens: TokenCount,
    pub budget: TokenCount,
    /// Size before degradation; above `budget` when the budget overflowed.
    pub requested_tokens: TokenCount,
}

impl WorkingMemory {
    pub fn overflowed(&self) -> bool {
        self.requested_tokens > self.budget
    }

    pub fn render(&self) -> String {
        if self.entries.is_empty() {
            return NO_PRIOR_STEPS.to_string();
        }
        self.entries
            .iter()
            .map(|e| format!("{}\n{}", e.label, e.text))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

fn step_entry(pool: &MemoryPool, step: usize, rep: Representation) -> MemoryEntry {
    match rep {
        Representation::Raw => {
            let r = pool.record(step).expect("step exists");
            MemoryEntry {
                kind: EntryKind::Raw,
                position: step,
                label: format!("[step {step} | raw]"),
                text: r.raw_text.clone(),
                tokens: r.raw_tokens,
            }
        }
        _ => {
            let s = pool.summary(step).expect("step exists");
            MemoryEntry {
                kind: EntryKind::Summary,
                position: step,
                label: format!("[step {step} | summary]"),
                text: s.summary_text.clone(),
                tokens: s.summary_tokens,
            }
        }
    }
}

/// Builds working memory for `decision`, then fits it to `budget`:
/// raw entries are demoted to summaries oldest first, then the oldest
/// summary and episode entries are dropped. The newest unit is never
/// dropped. Decision entries for folded steps are ignored; their episode
/// stands in for them.
pub fn assemble_working_memory(
    pool: &MemoryPool,
    decision: &SelectorDecision,
    budget: TokenCount,
) -> Result<WorkingMemory, EmoError> {
    let units = pool.units();
    if let Some(newest) = units.last() {
        let needed = match *newest {
            Unit::Step(i) => pool.summary(i).expect("step exists").summary_tokens,
            Unit::Episode(k) => pool.episode(k).expect("episode exists").episode_tokens,
        };
        if needed > budget {
            return Err(EmoError::BudgetTooSmall { needed, budget });
        }
    }

    let mut entries = Vec::new();
    for unit in &units {
        match *unit {
            Unit::Step(i) => {
                let rep = *decision
                    .per_step
                    .get(&i)
                    .ok_or_else(|| EmoError::InvalidDecision(format!("no representation for step {i}")))?;
                if rep != Representation::Omit {
                    entries.push(step_entry(pool, i, rep));
                }
            }
            Unit::Episode(k) => {
                let e = pool.episode(k).expect("episode exists");
                entries.push(MemoryEntry {
                    kind: EntryKind::Episode,
                    position: e.first_step,
                    label: format!("[episode {} | steps {}-{}]", e.episode_id, e.first_step, e.last_step),
                    text: e.text.clone(),
                    tokens: e.episode_tokens,
                });
            }
        }
    }

    let newest_position = units.last().map(|u| match *u {
        Unit::Step(i) => i,
        Unit::Episode(k) => pool.episode(k).expect("episode exists").first_step,
    });
    let requested: TokenCount = entries.iter().map(|e| e.tokens).sum();
    let mut total = requested;

    for entry in entries.iter_mut() {
        if total <= budget {
            break;
        }
        if entry.kind == EntryKind::Raw {
            let demoted = step_entry(pool, entry.position, Representation::Summary);
            total = total - entry.tokens + demoted.tokens;
            *entry = demoted;
        }
    }
    if total > budget {
        let mut kept = Vec::with_capacity(entries.len());
        for entry in entries {
            if total > budget && Some(entry.position) != newest_position {
                total = total - entry.tokens;
            } else {
                kept.push(entry);
            }
        }
        entries = kept;
    }
    debug_assert!(total <= budget);

    Ok(WorkingMemory {
        entries,
        total_tokens: total,
        budget,
        requested_tokens: requested,
    })
}
