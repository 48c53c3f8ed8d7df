//! Re-executes a logged task and compares the regenerated log bytes.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use cogloop_core::model::{serialize_trajectory, TaskSpec, FORMAT_VERSION};

use crate::suite::{run_task, Suite, STORE_FILE};
use crate::{read, HarnessError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReplayVerdict {
    Match,
    /// First differing line (1-based) with both versions of it; a line
    /// missing on one side is empty.
    Diverged { line: usize, logged: String, replayed: String },
}

impl fmt::Display for ReplayVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReplayVerdict::Match => f.write_str("Match"),
            ReplayVerdict::Diverged { line, .. } => write!(f, "Diverged at line {line}"),
        }
    }
}

/// First line where two logs differ.
pub fn compare_logs(logged: &[u8], replayed: &[u8]) -> ReplayVerdict {
    if logged == replayed {
        return ReplayVerdict::Match;
    }
    let a: Vec<&[u8]> = logged.split(|b| *b == b'\n').collect();
    let b: Vec<&[u8]> = replayed.split(|b| *b == b'\n').collect();
    let text = |lines: &[&[u8]], i: usize| lines.get(i).map(|l| String::from_utf8_lossy(l).into_owned()).unwrap_or_default();
    let i = (0..a.len().max(b.len())).find(|&i| a.get(i) != b.get(i)).unwrap_or(0);
    ReplayVerdict::Diverged {
        line: i + 1,
        logged: text(&a, i),
        replayed: text(&b, i),
    }
}

/// The task and cognition version recorded in a log header.
pub fn log_header(bytes: &[u8], path: &Path) -> Result<(TaskSpec, u64), HarnessError> {
    let malformed = |reason: String| HarnessError::MalformedLine {
        path: path.display().to_string(),
        line: 1,
        reason,
    };
    let first = bytes.split(|b| *b == b'\n').next().unwrap_or_default();
    let header: serde_json::Value = serde_json::from_slice(first).map_err(|e| malformed(e.to_string()))?;
    if header.get("format_version").and_then(|v| v.as_u64()) != Some(u64::from(FORMAT_VERSION)) {
        return Err(malformed("unsupported or missing format_version".into()));
    }
    let task: TaskSpec = header
        .get("task")
        .cloned()
        .ok_or_else(|| malformed("header lacks task".into()))
        .and_then(|t| serde_json::from_value(t).map_err(|e| malformed(e.to_string())))?;
    let version = header
        .get("cognition_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| malformed("header lacks cognition_version".into()))?;
    Ok((task, version))
}

/// Replays one log against the run directory that holds its config,
/// scenario and cognition snapshot. The run's seed and config are used,
/// not the ones in the log, so a foreign log diverges.
pub fn replay(log_path: &Path, run_dir: &Path) -> Result<ReplayVerdict, HarnessError> {
    let logged = read(log_path)?;
    let (task, version) = log_header(&logged, log_path)?;
    let suite = Suite::from_dir(run_dir)?;
    let store = cogloop_core::cognition::CognitionStore::import_snapshot(&read(&run_dir.join(STORE_FILE))?)?;
    let store = store.at_version(version)?;
    let run = run_task(&suite, &store, &task, None)?;
    Ok(compare_logs(&logged, &serialize_trajectory(&run.trajectory)))
}

/// The run directory a log lives in: `<run>/logs/<task>.jsonl`.
pub fn run_dir_of(log_path: &Path) -> Option<&Path> {
    log_path.parent()?.parent()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_difference() {
        assert_eq!(compare_logs(b"a\nb\n", b"a\nb\n"), ReplayVerdict::Match);
        assert_eq!(
            compare_logs(b"a\nb\nc\n", b"a\nx\nc\n"),
            ReplayVerdict::Diverged {
                line: 2,
                logged: "b".into(),
                replayed: "x".into()
            }
        );
        match compare_logs(b"a\n", b"a\nb\n") {
            ReplayVerdict::Diverged { line, logged, .. } => {
                assert_eq!(line, 2);
                assert_eq!(logged, "");
            }
            v => panic!("{v:?}"),
        }
    }
}
