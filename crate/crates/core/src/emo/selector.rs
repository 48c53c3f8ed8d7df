use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::pool::MemoryPool;
use crate::backend::{CallSite, CompletionBackend, CompletionRequest, GenerationLimits};

/// How one step appears in working memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Representation {
    Raw,
    Summary,
    Omit,
}

impl Representation {
    /// Accepts the names and the boolean/None spelling (`False` raw,
    /// `True` summary, `None` omit).
    pub fn parse(token: &str) -> Option<Self> {
        match token.trim().to_ascii_lowercase().as_str() {
            "raw" | "false" => Some(Representation::Raw),
            "summary" | "true" => Some(Representation::Summary),
            "omit" | "none" => Some(Representation::Omit),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SelectorDecision {
    pub per_step: BTreeMap<usize, Representation>,
    pub fold: Option<(usize, usize)>,
}

impl SelectorDecision {
    /// Every unfolded step gets `rep`; no fold.
    pub fn uniform(pool: &MemoryPool, rep: Representation) -> Self {
        SelectorDecision {
            per_step: pool.unfolded_steps().into_iter().map(|i| (i, rep)).collect(),
            fold: None,
        }
    }
}

const HEURISTIC_RAW_STEPS: usize = 2;

/// The newest two unfolded steps raw, everything else summarized.
pub fn heuristic_decision(pool: &MemoryPool) -> SelectorDecision {
    let unfolded = pool.unfolded_steps();
    let raw_from = unfolded.len().saturating_sub(HEURISTIC_RAW_STEPS);
    SelectorDecision {
        per_step: unfolded
            .iter()
            .enumerate()
            .map(|(pos, &i)| {
                let rep = if pos >= raw_from {
                    Representation::Raw
                } else {
                    Representation::Summary
                };
                (i, rep)
            })
            .collect(),
        fold: None,
    }
}

fn valid_fold(pool: &MemoryPool, (first, last): (usize, usize)) -> bool {
    last > first && last < pool.len() && (first..=last).all(|i| pool.episode_covering(i).is_none())
}

/// The automatic fold range once more than `threshold` steps are unfolded:
/// the oldest half of the unfolded steps, cut at the first gap, when that
/// run still spans at least two steps.
pub fn auto_fold_range(pool: &MemoryPool, threshold: usize) -> Option<(usize, usize)> {
    let unfolded = pool.unfolded_steps();
    if unfolded.len() <= threshold {
        return None;
    }
    let want = unfolded.len() / 2;
    let first = unfolded[0];
    let mut last = first;
    for &i in unfolded.iter().take(want).skip(1) {
        if i != last + 1 {
            break;
        }
        last = i;
    }
    (last > first).then_some((first, last))
}

/// Parses `"i:Rep, j:Rep ... [FOLD: a-b]"`. Any malformed step token
/// discards the whole answer (`None`); steps the answer leaves out take
/// their heuristic representation, and an invalid fold is dropped.
pub fn parse_selector_output(pool: &MemoryPool, text: &str) -> Option<SelectorDecision> {
    let upper = text.to_ascii_uppercase();
    let (head, fold_part) = match upper.find("FOLD:") {
        Some(at) => (&text[..at], Some(&text[at + 5..])),
        None => (text, None),
    };
    let unfolded = pool.unfolded_steps();
    let mut per_step = BTreeMap::new();
    for token in head.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
        let (index, rep) = token.split_once(':')?;
        let index: usize = index.trim().parse().ok()?;
        let rep = Representation::parse(rep)?;
        if !unfolded.contains(&index) || per_step.insert(index, rep).is_some() {
            return None;
        }
    }
    if per_step.is_empty() {
        return None;
    }
    for (i, rep) in heuristic_decision(pool).per_step {
        per_step.entry(i).or_insert(rep);
    }
    let fold = fold_part.and_then(|f| {
        let (a, b) = f.split_whitespace().next()?.split_once('-')?;
        let range = (a.trim().parse().ok()?, b.trim().parse().ok()?);
        valid_fold(pool, range).then_some(range)
    });
    Some(SelectorDecision { per_step, fold })
}

fn selector_prompt(pool: &MemoryPool, task_context: &str) -> String {
    let mut prompt = String::from(
        "Decide how each past step should appear in the working memory for the next decision.\n\
         For every step listed below answer <index>:<Raw|Summary|Omit>, separated by commas.\n\
         Raw keeps the full record, Summary keeps the abstract, Omit drops the step.\n\
         Optionally append FOLD: <first>-<last> to fold a contiguous range of listed steps into one episode.\n\n",
    );
    prompt.push_str("## Current task\n");
    prompt.push_str(task_context.trim());
    prompt.push_str("\n\n## Step summaries\n");
    for i in pool.unfolded_steps() {
        let s = pool.summary(i).expect("unfolded step exists");
        prompt.push_str(&format!("[step {i}] {}\n", s.summary_text));
    }
    prompt
}

/// Asks the selector for a decision over every unfolded step, falling back
/// to [`heuristic_decision`] on any failure. Without a selector fold
/// directive, [`auto_fold_range`] proposes one.
pub fn select_representations(
    pool: &MemoryPool,
    task_context: &str,
    selector: Option<&dyn CompletionBackend>,
    limits: GenerationLimits,
    fold_threshold: usize,
) -> SelectorDecision {
    if pool.unfolded_steps().is_empty() {
        return SelectorDecision::default();
    }
    let mut decision = selector
        .and_then(|backend| {
            backend
                .complete(&CompletionRequest::new(
                    CallSite::Selector,
                    selector_prompt(pool, task_context),
                    limits,
                ))
                .ok()
        })
        .and_then(|c| parse_selector_output(pool, &c.text))
        .unwrap_or_else(|| heuristic_decision(pool));
    if decision.fold.is_none() {
        decision.fold = auto_fold_range(pool, fold_threshold);
    }
    decision
}
