use serde::{Deserialize, Serialize};

use super::fold::{Episode, EpisodeSource};
use super::EmoError;
use crate::backend::{CallSite, CompletionBackend, CompletionRequest, GenerationLimits};
use crate::model::{
    first_words, token_count, truncate_to_tokens, ActionKind, ActionRecord, Outcome, OutcomeStatus, Parameters,
    TokenCount,
};

pub const POOL_FORMAT_VERSION: u32 = 1;
const FALLBACK_SUMMARY_WORDS: usize = 20;

/// Renders the raw record text. The payload comes last and may span lines.
pub fn render_raw(step_index: usize, rationale: &str, kind: &ActionKind, parameters: &Parameters, outcome: &Outcome) -> String {
    let params = if parameters.is_empty() {
        "none".to_string()
    } else {
        parameters
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join("; ")
    };
    format!(
        "step: {step_index}\nrationale: {rationale}\naction: {}\nparams: {params}\nstatus: {}\npayload: {}",
        kind.name(),
        outcome.status,
        outcome.payload
    )
}

/// The lossless record of one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step_index: usize,
    pub selection_rationale: String,
    pub kind: ActionKind,
    pub parameters: Parameters,
    pub outcome: Outcome,
    pub raw_text: String,
    pub raw_tokens: TokenCount,
}

impl StepRecord {
    pub fn new(
        step_index: usize,
        selection_rationale: impl Into<String>,
        kind: ActionKind,
        parameters: Parameters,
        outcome: Outcome,
    ) -> Self {
        let selection_rationale = selection_rationale.into();
        let raw_text = render_raw(step_index, &selection_rationale, &kind, &parameters, &outcome);
        StepRecord {
            step_index,
            raw_tokens: token_count(&raw_text),
            selection_rationale,
            kind,
            parameters,
            outcome,
            raw_text,
        }
    }

    pub fn from_action(record: &ActionRecord) -> Self {
        Self::new(
            record.step_index,
            record.intention.clone(),
            record.kind.clone(),
            record.parameters.clone(),
            record.outcome.clone(),
        )
    }

    fn is_consistent(&self) -> bool {
        let expected = render_raw(
            self.step_index,
            &self.selection_rationale,
            &self.kind,
            &self.parameters,
            &self.outcome,
        );
        expected == self.raw_text && self.raw_tokens == token_count(&expected)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeTag {
    Ok,
    Err,
    Peer,
}

impl OutcomeTag {
    pub fn of(outcome: &Outcome) -> Self {
        match outcome.status {
            OutcomeStatus::Success => OutcomeTag::Ok,
            OutcomeStatus::PeerResponse => OutcomeTag::Peer,
            _ => OutcomeTag::Err,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeTag::Ok => "ok",
            OutcomeTag::Err => "err",
            OutcomeTag::Peer => "peer",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepSummary {
    pub step_index: usize,
    pub summary_text: String,
    pub outcome_tag: OutcomeTag,
    pub summary_tokens: TokenCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummarySource {
    Compressor,
    Fallback,
}

/// A position in the pool: a bare step or an episode standing for its range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Step(usize),
    Episode(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MemoryStats {
    pub steps: usize,
    pub episodes: usize,
    pub raw_tokens: TokenCount,
    pub summary_tokens: TokenCount,
    pub episode_tokens: TokenCount,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MemoryPool {
    pub(super) steps: Vec<(StepRecord, StepSummary)>,
    pub(super) episodes: Vec<Episode>,
}

impl MemoryPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn record(&self, step: usize) -> Option<&StepRecord> {
        self.steps.get(step).map(|(r, _)| r)
    }

    pub fn summary(&self, step: usize) -> Option<&StepSummary> {
        self.steps.get(step).map(|(_, s)| s)
    }

    pub fn records(&self) -> impl Iterator<Item = &StepRecord> {
        self.steps.iter().map(|(r, _)| r)
    }

    /// Episodes in fold order; this is the fold log.
    pub fn episodes(&self) -> &[Episode] {
        &self.episodes
    }

    pub fn episode_covering(&self, step: usize) -> Option<&Episode> {
        self.episodes.iter().find(|e| e.covers(step))
    }

    pub fn unfolded_steps(&self) -> Vec<usize> {
        (0..self.steps.len())
            .filter(|&i| self.episode_covering(i).is_none())
            .collect()
    }

    /// Units in position order; an episode takes the place of its steps.
    pub fn units(&self) -> Vec<Unit> {
        let mut units = Vec::new();
        let mut i = 0;
        while i < self.steps.len() {
            match self.episode_covering(i) {
                Some(e) => {
                    units.push(Unit::Episode(e.episode_id));
                    i = e.last_step + 1;
                }
                None => {
                    units.push(Unit::Step(i));
                    i += 1;
                }
            }
        }
        units
    }

    pub fn episode(&self, id: usize) -> Option<&Episode> {
        self.episodes.iter().find(|e| e.episode_id == id)
    }

    pub fn stats(&self) -> MemoryStats {
        MemoryStats {
            steps: self.steps.len(),
            episodes: self.episodes.len(),
            raw_tokens: self.steps.iter().map(|(r, _)| r.raw_tokens).sum(),
            summary_tokens: self.steps.iter().map(|(_, s)| s.summary_tokens).sum(),
            episode_tokens: self.episodes.iter().map(|e| e.episode_tokens).sum(),
        }
    }

    /// Header line, one line per step, one line per episode in fold order.
    pub fn snapshot(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let mut line = |value: serde_json::Value| {
            serde_json::to_writer(&mut out, &value).expect("pool serializes");
            out.push(b'\n');
        };
        line(serde_json::json!({
            "format_version": POOL_FORMAT_VERSION,
            "kind": "memory_pool",
            "steps": self.steps.len(),
            "episodes": self.episodes.len(),
        }));
        for (record, summary) in &self.steps {
            line(serde_json::json!({ "step": record, "summary": summary }));
        }
        for episode in &self.episodes {
            line(serde_json::json!({ "episode": episode }));
        }
        out
    }

    pub fn from_snapshot(bytes: &[u8]) -> Result<Self, EmoError> {
        #[derive(Deserialize)]
        struct Header {
            format_version: u32,
            kind: String,
            steps: usize,
            episodes: usize,
        }
        #[derive(Deserialize)]
        struct StepLine {
            step: StepRecord,
            summary: StepSummary,
        }
        #[derive(Deserialize)]
        struct EpisodeLine {
            episode: Episode,
        }
        let bad = |line: usize, reason: String| EmoError::MalformedSnapshot { line, reason };
        let text = std::str::from_utf8(bytes).map_err(|e| bad(1, e.to_string()))?;
        let lines: Vec<&str> = text.lines().collect();
        let header: Header = lines
            .first()
            .ok_or_else(|| bad(1, "empty snapshot".into()))
            .and_then(|l| serde_json::from_str(l).map_err(|e| bad(1, e.to_string())))?;
        if header.format_version != POOL_FORMAT_VERSION || header.kind != "memory_pool" {
            return Err(bad(1, "unsupported snapshot header".into()));
        }
        if lines.len() != 1 + header.steps + header.episodes {
            return Err(bad(lines.len(), "line count does not match header".into()));
        }
        let mut pool = MemoryPool::new();
        for (i, l) in lines[1..=header.steps].iter().enumerate() {
            let n = i + 2;
            let parsed: StepLine = serde_json::from_str(l).map_err(|e| bad(n, e.to_string()))?;
            if parsed.step.step_index != i || parsed.summary.step_index != i || !parsed.step.is_consistent() {
                return Err(bad(n, "step record is inconsistent".into()));
            }
            pool.steps.push((parsed.step, parsed.summary));
        }
        for (i, l) in lines[1 + header.steps..].iter().enumerate() {
            let n = i + 2 + header.steps;
            let parsed: EpisodeLine = serde_json::from_str(l).map_err(|e| bad(n, e.to_string()))?;
            pool.episodes.push(parsed.episode);
        }
        Ok(pool)
    }

    pub(super) fn push_episode(&mut self, episode: Episode) {
        self.episodes.push(episode);
    }

    pub(super) fn next_episode_id(&self) -> usize {
        self.episodes.len()
    }
}

impl Episode {
    pub fn covers(&self, step: usize) -> bool {
        self.first_step <= step && step <= self.last_step
    }

    pub fn source(&self) -> EpisodeSource {
        self.source
    }
}

fn compress_prompt(raw: &str) -> String {
    format!(
        "Summarize the following agent step in one line of at most {FALLBACK_SUMMARY_WORDS} words. \
         Keep the action name and the key result.\n\n{raw}"
    )
}

/// `"<action> <ok|err|peer>: <first 20 words of payload>"`.
pub fn fallback_summary(record: &StepRecord) -> String {
    let tag = OutcomeTag::of(&record.outcome);
    format!(
        "{} {}: {}",
        record.kind.name(),
        tag.as_str(),
        first_words(&record.outcome.payload, FALLBACK_SUMMARY_WORDS)
    )
    .trim_end()
    .to_string()
}

/// Adds a step and its summary. A missing, empty or over-long compressor
/// answer is replaced by the deterministic fallback abstract.
pub fn ingest_step(
    pool: &mut MemoryPool,
    record: StepRecord,
    compressor: Option<&dyn CompletionBackend>,
    limits: GenerationLimits,
) -> Result<SummarySource, EmoError> {
    if record.step_index != pool.len() {
        return Err(EmoError::IndexGap {
            expected: pool.len(),
            got: record.step_index,
        });
    }
    let compressed = compressor.and_then(|backend| {
        backend
            .complete(&CompletionRequest::new(CallSite::Compress, compress_prompt(&record.raw_text), limits))
            .ok()
            .map(|c| c.text.trim().to_string())
            .filter(|text| !text.is_empty() && token_count(text) <= record.raw_tokens)
    });
    let (text, source) = match compressed {
        Some(text) => (text, SummarySource::Compressor),
        None => {
            let mut text = fallback_summary(&record);
            if token_count(&text) > record.raw_tokens {
                text = truncate_to_tokens(&text, record.raw_tokens).to_string();
            }
            (text, SummarySource::Fallback)
        }
    };
    let summary = StepSummary {
        step_index: record.step_index,
        summary_tokens: token_count(&text),
        summary_text: text,
        outcome_tag: OutcomeTag::of(&record.outcome),
    };
    pool.steps.push((record, summary));
    Ok(source)
}
