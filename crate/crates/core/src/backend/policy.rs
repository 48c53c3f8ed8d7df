//! Prompt-reading scripted policies.
//!
//! A policy answers `select` calls by reading the rendered select prompt,
//! so its choice is a pure function of the prompt bytes. It understands the
//! section layout produced by [`crate::decision::render_select_prompt`].

use serde::{Deserialize, Serialize};

use super::CompletionRequest;
use crate::decision::prompt::{ACTIONS_HEADER, MEMORY_HEADER, TASK_HEADER};
use crate::decision::escape_param_value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScriptPolicy {
    /// Query the candidate tool with the highest rendered reliability
    /// estimate (first offered wins ties), skipping candidates that already
    /// failed in visible memory; answer with the first successful payload.
    ReliabilityRouter {
        candidates: Vec<String>,
        #[serde(default = "default_query_param")]
        query_param: String,
        #[serde(default = "default_intention")]
        intention: String,
    },
}

fn default_query_param() -> String {
    "query".to_string()
}

fn default_intention() -> String {
    "look up the answer to the task question".to_string()
}

impl ScriptPolicy {
    pub fn respond(&self, request: &CompletionRequest) -> String {
        match self {
            ScriptPolicy::ReliabilityRouter {
                candidates,
                query_param,
                intention,
            } => route_by_reliability(request.first_prompt(), candidates, query_param, intention),
        }
    }
}

#[derive(Debug, Default)]
struct MemoryEvent {
    action: String,
    ok: bool,
    payload: Option<String>,
}

fn section<'a>(prompt: &'a str, header: &str) -> Vec<&'a str> {
    let mut lines = prompt.lines().skip_while(|l| l.trim_end() != header);
    if lines.next().is_none() {
        return Vec::new();
    }
    lines.take_while(|l| !l.starts_with("## ")).collect()
}

fn memory_events(prompt: &str) -> Vec<MemoryEvent> {
    let mut entries: Vec<Vec<&str>> = Vec::new();
    for line in section(prompt, MEMORY_HEADER) {
        if line.starts_with("[step ") || line.starts_with("[episode ") {
            entries.push(vec![line]);
        } else if let Some(entry) = entries.last_mut() {
            entry.push(line);
        }
    }
    entries
        .into_iter()
        .filter_map(|entry| {
            let label = entry[0];
            let body = &entry[1..];
            if label.contains("| raw]") {
                let mut event = MemoryEvent::default();
                for (i, line) in body.iter().enumerate() {
                    if let Some(rest) = line.strip_prefix("action: ") {
                        event.action = rest.trim().to_string();
                    } else if let Some(rest) = line.strip_prefix("status: ") {
                        event.ok = matches!(rest.trim(), "Success" | "PeerResponse");
                    } else if let Some(rest) = line.strip_prefix("payload: ") {
                        let mut payload = vec![rest];
                        payload.extend(body[i + 1..].iter().copied());
                        event.payload = Some(payload.join("\n"));
                        break;
                    }
                }
                Some(event)
            } else if label.contains("| summary]") {
                // fallback abstracts read "<action> <ok|err|peer>: <words>"
                let first = body.first()?;
                let (head, _) = first.split_once(':')?;
                let (action, tag) = head.rsplit_once(' ')?;
                Some(MemoryEvent {
                    action: action.to_string(),
                    ok: tag != "err",
                    payload: None,
                })
            } else {
                None
            }
        })
        .collect()
}

/// Offered action names in prompt order, each with its first rendered
/// reliability estimate.
fn offered_estimates(prompt: &str) -> Vec<(String, Option<f64>)> {
    let mut offered: Vec<(String, Option<f64>)> = Vec::new();
    for line in section(prompt, ACTIONS_HEADER) {
        if let Some(rest) = line.strip_prefix("### ") {
            let name = rest.split(" [").next().unwrap_or(rest).trim().to_string();
            offered.push((name, None));
        } else if let (Some(last), Some(rest)) = (offered.last_mut(), line.strip_prefix("reliability: ")) {
            if last.1.is_none() {
                last.1 = rest
                    .split("(estimate ")
                    .nth(1)
                    .and_then(|s| s.trim_end_matches(')').trim().parse().ok());
            }
        }
    }
    offered
}

fn route_by_reliability(prompt: &str, candidates: &[String], query_param: &str, intention: &str) -> String {
    let events = memory_events(prompt);
    if let Some(answer) = events
        .iter()
        .filter(|e| e.ok && candidates.contains(&e.action))
        .find_map(|e| e.payload.as_deref())
    {
        let answer = answer.lines().next().unwrap_or("").trim();
        return format!(
            "ACTION: FinalAnswer; PARAMS: answer={}; INTENTION: report the retrieved answer",
            escape_param_value(answer)
        );
    }

    let failed: Vec<&str> = events
        .iter()
        .filter(|e| !e.ok)
        .map(|e| e.action.as_str())
        .collect();
    let offered = offered_estimates(prompt);
    let mut best: Option<(&str, f64)> = None;
    for (name, estimate) in offered.iter() {
        if !candidates.contains(name) || failed.contains(&name.as_str()) {
            continue;
        }
        let estimate = estimate.unwrap_or(0.5);
        if best.is_none_or(|(_, b)| estimate > b) {
            best = Some((name.as_str(), estimate));
        }
    }
    match best {
        Some((tool, _)) => {
            let query = section(prompt, TASK_HEADER)
                .iter()
                .map(|l| l.trim())
                .filter(|l| !l.is_empty())
                .collect::<Vec<_>>()
                .join(" ");
            format!(
                "ACTION: {tool}; PARAMS: {query_param}={}; INTENTION: {intention}",
                escape_param_value(&query)
            )
        }
        None => "ACTION: FinalAnswer; PARAMS: answer=unknown; INTENTION: no candidate tool left to try"
            .to_string(),
    }
}
