use std::fmt;

use serde::{Deserialize, Serialize};

use crate::backend::{CallSite, CompletionBackend, CompletionRequest, GenerationLimits};
use crate::decision::answers_match;
use crate::model::{ActionKind, ActionRecord, StepRef, TaskSpec, Trajectory};

use super::Verdicts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Fulfilled,
    Partial,
    Violated,
    Indeterminate,
}

impl Verdict {
    pub fn is_positive(self) -> bool {
        matches!(self, Verdict::Fulfilled | Verdict::Partial)
    }

    fn parse(word: &str) -> Option<Verdict> {
        match word.trim().to_ascii_lowercase().as_str() {
            "fulfilled" => Some(Verdict::Fulfilled),
            "partial" => Some(Verdict::Partial),
            "violated" => Some(Verdict::Violated),
            _ => None,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentVerdict {
    pub step_ref: StepRef,
    pub verdict: Verdict,
    pub rationale: String,
}

fn align_prompt(task: &TaskSpec, record: &ActionRecord) -> String {
    format!(
        "Judge whether a step achieved what the agent meant it to achieve.\n\n\
         ## Task\n{}\n\n## Intention\n{}\n\n## Action\n{}\n\n## Outcome\nstatus: {}\n{}\n\n\
         Answer with one line of the form `<verdict>: <rationale>` where the verdict is \
         Fulfilled, Partial or Violated.",
        task.instruction,
        record.intention,
        record.kind.name(),
        record.outcome.status,
        record.outcome.payload
    )
}

/// First non-empty line as `Verdict: rationale`. A bare verdict word is
/// accepted too.
fn parse_verdict(text: &str) -> Option<(Verdict, String)> {
    let line = text.lines().map(str::trim).find(|l| !l.is_empty())?;
    let (head, rest) = line.split_once(':').unwrap_or((line, ""));
    let verdict = Verdict::parse(head)?;
    Some((verdict, rest.trim().to_string()))
}

/// Judges one step. Structural rules come first; the analyzer only sees
/// steps no rule decides.
pub fn align(
    task: &TaskSpec,
    record: &ActionRecord,
    analyzer: Option<&dyn CompletionBackend>,
    limits: GenerationLimits,
) -> AlignmentVerdict {
    let step_ref = StepRef::new(task.task_id.clone(), record.step_index);
    let verdict = |verdict, rationale: String| AlignmentVerdict {
        step_ref: step_ref.clone(),
        verdict,
        rationale,
    };
    if record.outcome.is_error() {
        return verdict(
            Verdict::Violated,
            format!("outcome status {}", record.outcome.status),
        );
    }
    if record.kind == ActionKind::FinalAnswer {
        if let Some(gold) = &task.gold_answer {
            return if answers_match(&record.outcome.payload, gold) {
                verdict(Verdict::Fulfilled, "answer matches the reference".into())
            } else {
                verdict(Verdict::Violated, "answer differs from the reference".into())
            };
        }
    }
    let Some(analyzer) = analyzer else {
        return verdict(Verdict::Indeterminate, "no analyzer available".into());
    };
    let request = CompletionRequest::new(CallSite::Align, align_prompt(task, record), limits);
    match analyzer.complete(&request) {
        Ok(completion) => match parse_verdict(&completion.text) {
            Some((v, rationale)) => verdict(v, rationale),
            None => verdict(Verdict::Indeterminate, "unparsable analyzer answer".into()),
        },
        Err(e) => verdict(Verdict::Indeterminate, format!("analyzer unavailable: {e}")),
    }
}

/// Verdicts for every step of every trajectory.
pub fn align_corpus(
    corpus: &[Trajectory],
    analyzer: Option<&dyn CompletionBackend>,
    limits: GenerationLimits,
) -> Verdicts {
    corpus
        .iter()
        .flat_map(|t| t.records.iter().map(move |r| (t, r)))
        .map(|(t, r)| {
            let v = align(&t.task, r, analyzer, limits);
            (v.step_ref.clone(), v)
        })
        .collect()
}
