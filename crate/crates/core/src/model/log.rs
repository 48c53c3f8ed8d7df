//! Line-delimited JSON trajectory logs.
//!
//! ```text
//! {"format_version":1,"task_id":..,"cognition_version":..,"config_snapshot":{..},"task":{..}}
//! {"step_index":0,"intention":..,"kind":{..},"parameters":{..},"outcome":{..},"start_tick":..,"end_tick":..}
//! ...
//! {"final_status":"Solved","final_answer":"42","usage":{"prompt_tokens":..,"completion_tokens":..}}
//! ```
//!
//! Field order is the declaration order below and maps are sorted, so a
//! trajectory always serializes to the same bytes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ActionRecord, FinalStatus, RunConfig, TaskSpec, Trajectory, Usage};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LogError {
    #[error("log format version {found} is not supported (expected {expected})")]
    FormatVersionMismatch { found: u64, expected: u32 },
    #[error("malformed log line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    task_id: String,
    cognition_version: u64,
    config_snapshot: RunConfig,
    task: TaskSpec,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Footer {
    final_status: FinalStatus,
    final_answer: Option<String>,
    usage: Usage,
}

fn to_line<T: Serialize>(value: &T, out: &mut Vec<u8>) {
    serde_json::to_writer(&mut *out, value).expect("log values always serialize");
    out.push(b'\n');
}

pub fn serialize_trajectory(trajectory: &Trajectory) -> Vec<u8> {
    let mut out = Vec::new();
    to_line(
        &Header {
            format_version: FORMAT_VERSION,
            task_id: trajectory.task.task_id.clone(),
            cognition_version: trajectory.cognition_version,
            config_snapshot: trajectory.config_snapshot.clone(),
            task: trajectory.task.clone(),
        },
        &mut out,
    );
    for record in &trajectory.records {
        to_line(record, &mut out);
    }
    to_line(
        &Footer {
            final_status: trajectory.final_status,
            final_answer: trajectory.final_answer.clone(),
            usage: trajectory.usage,
        },
        &mut out,
    );
    out
}

fn malformed(line: usize, reason: impl ToString) -> LogError {
    LogError::MalformedLine {
        line,
        reason: reason.to_string(),
    }
}

pub fn deserialize_trajectory(bytes: &[u8]) -> Result<Trajectory, LogError> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|b| **b == b'\n').count() + 1;
        malformed(line, "invalid UTF-8")
    })?;
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() < 2 {
        return Err(malformed(lines.len() + 1, "missing header or final-status line"));
    }

    let head: serde_json::Value = serde_json::from_str(lines[0]).map_err(|e| malformed(1, e))?;
    let version = head
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| malformed(1, "header lacks format_version"))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(LogError::FormatVersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let header: Header = serde_json::from_value(head).map_err(|e| malformed(1, e))?;
    if header.task.task_id != header.task_id {
        return Err(malformed(1, "header task_id disagrees with task"));
    }

    let mut trajectory = Trajectory::begin(header.task, header.config_snapshot, header.cognition_version);
    let last = lines.len() - 1;
    for (idx, line) in lines[1..last].iter().enumerate() {
        let number = idx + 2;
        let record: ActionRecord = serde_json::from_str(line).map_err(|e| malformed(number, e))?;
        trajectory
            .append_record(record)
            .map_err(|e| malformed(number, e))?;
    }
    let footer: Footer = serde_json::from_str(lines[last]).map_err(|e| malformed(last + 1, e))?;
    trajectory.finish(footer.final_status, footer.final_answer);
    trajectory.usage = footer.usage;
    Ok(trajectory)
}
