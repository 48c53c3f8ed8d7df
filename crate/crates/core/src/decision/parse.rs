use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::space::ActionDescriptor;
use crate::model::{ActionKind, Parameters};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SelectionError {
    #[error("malformed selection: {0}")]
    Grammar(String),
    #[error("unknown action {0}")]
    UnknownActionName(String),
    #[error("action {action} is missing required parameter {param}")]
    MissingRequiredParam { action: String, param: String },
    #[error("action {action} has no parameter {param}")]
    UnknownParam { action: String, param: String },
}

/// A parsed, validated choice from the offered action space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub kind: ActionKind,
    pub parameters: Parameters,
    pub intention: String,
}

/// Escapes `;` and `\` inside a parameter value.
pub fn escape_param_value(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        if c == '\\' || c == ';' {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

/// Inverse of [`escape_param_value`]; other backslashes are kept.
pub fn unescape_param_value(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    let mut chars = value.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '\\' {
            if let Some(&next @ (';' | '\\')) = chars.peek() {
                out.push(next);
                chars.next();
                continue;
            }
        }
        out.push(c);
    }
    out
}

/// Splits on semicolons that are not escaped; escapes stay in the pieces.
fn split_unescaped(line: &str) -> Vec<&str> {
    let mut pieces = Vec::new();
    let mut start = 0;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        if escaped {
            escaped = false;
        } else if c == '\\' {
            escaped = true;
        } else if c == ';' {
            pieces.push(&line[start..i]);
            start = i + 1;
        }
    }
    pieces.push(&line[start..]);
    pieces
}

fn grammar(msg: impl Into<String>) -> SelectionError {
    SelectionError::Grammar(msg.into())
}

/// Strict parse of `ACTION: <name>; PARAMS: <k=v; ...>; INTENTION: <line>`.
pub fn parse_selection(raw: &str, space: &[ActionDescriptor]) -> Result<Selection, SelectionError> {
    let line = raw.trim();
    if line.is_empty() {
        return Err(grammar("empty output"));
    }
    if line.contains('\n') || line.contains('\r') {
        return Err(grammar("selection must be a single line"));
    }
    let pieces = split_unescaped(line);
    let name = pieces[0]
        .trim()
        .strip_prefix("ACTION:")
        .ok_or_else(|| grammar("line must start with ACTION:"))?
        .trim();
    if name.is_empty() {
        return Err(grammar("empty action name"));
    }
    let params_first = pieces
        .get(1)
        .and_then(|p| p.trim_start().strip_prefix("PARAMS:"))
        .ok_or_else(|| grammar("missing PARAMS: field"))?;
    let intention_at = pieces
        .iter()
        .skip(1)
        .position(|p| p.trim_start().starts_with("INTENTION:"))
        .map(|i| i + 1)
        .ok_or_else(|| grammar("missing INTENTION: field"))?;
    if intention_at == 1 {
        return Err(grammar("missing PARAMS: field"));
    }
    let intention = pieces[intention_at..]
        .join(";")
        .trim_start()
        .strip_prefix("INTENTION:")
        .expect("checked prefix")
        .trim()
        .to_string();
    if intention.is_empty() {
        return Err(grammar("empty intention"));
    }

    let mut parameters = Parameters::new();
    let param_pieces = std::iter::once(params_first).chain(pieces[2..intention_at].iter().copied());
    for (i, piece) in param_pieces.enumerate() {
        let piece = piece.trim();
        if i == 0 && (piece.is_empty() || piece == "none") && intention_at == 2 {
            break;
        }
        let (key, value) = piece
            .split_once('=')
            .ok_or_else(|| grammar(format!("parameter {piece:?} is not name=value")))?;
        let key = key.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_alphanumeric() || c == '_') {
            return Err(grammar(format!("bad parameter name {key:?}")));
        }
        if parameters
            .insert(key.to_string(), unescape_param_value(value.trim()))
            .is_some()
        {
            return Err(grammar(format!("parameter {key} given twice")));
        }
    }

    let action = space
        .iter()
        .find(|a| a.name == name)
        .ok_or_else(|| SelectionError::UnknownActionName(name.to_string()))?;
    if let Some(param) = parameters
        .keys()
        .find(|k| !action.parameter_schema.iter().any(|p| &p.name == *k))
    {
        return Err(SelectionError::UnknownParam {
            action: action.name.clone(),
            param: param.clone(),
        });
    }
    if let Some(p) = action
        .parameter_schema
        .iter()
        .find(|p| p.required && !parameters.contains_key(&p.name))
    {
        return Err(SelectionError::MissingRequiredParam {
            action: action.name.clone(),
            param: p.name.clone(),
        });
    }
    Ok(Selection {
        kind: action.kind.clone(),
        parameters,
        intention,
    })
}
