use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{Outcome, ParamSpec, Parameters};

/// Deterministic tool behaviors a scenario can declare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ToolHandler {
    /// Arithmetic over `expression`: + - * / and parentheses.
    Calculator,
    /// Table lookup on the normalized `query`.
    Lookup {
        table: BTreeMap<String, String>,
        #[serde(default)]
        fallback: Option<String>,
    },
    /// First sentence of `text`.
    Extract,
    /// Returns `text` unchanged.
    Echo,
    /// Always fails with `message`.
    Fail { message: String },
    /// Mini-environment affordances.
    Go,
    Look,
    Take,
    Put,
}

impl ToolHandler {
    pub fn default_schema(&self) -> Vec<ParamSpec> {
        match self {
            ToolHandler::Calculator => vec![ParamSpec::required("expression", "arithmetic expression")],
            ToolHandler::Lookup { .. } => vec![ParamSpec::required("query", "what to look up")],
            ToolHandler::Extract => vec![ParamSpec::required("text", "text to extract from")],
            ToolHandler::Echo => vec![ParamSpec::required("text", "text to echo")],
            ToolHandler::Fail { .. } => vec![ParamSpec::optional("input", "ignored")],
            ToolHandler::Go => vec![ParamSpec::required("room", "room to walk to")],
            ToolHandler::Look => vec![],
            ToolHandler::Take => vec![ParamSpec::required("object", "object to pick up")],
            ToolHandler::Put => vec![
                ParamSpec::required("object", "held object to put down"),
                ParamSpec::required("room", "room to put it in; must be the current room"),
            ],
        }
    }

    pub fn is_env_affordance(&self) -> bool {
        matches!(self, ToolHandler::Go | ToolHandler::Look | ToolHandler::Take | ToolHandler::Put)
    }
}

fn default_ticks() -> u64 {
    1
}

fn default_timeout() -> u64 {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    /// Seeds the tool's cognition profile.
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameters: Option<Vec<ParamSpec>>,
    pub handler: ToolHandler,
    /// Simulated running time; above `timeout_ticks` the call times out.
    #[serde(default = "default_ticks")]
    pub ticks: u64,
    #[serde(default = "default_timeout")]
    pub timeout_ticks: u64,
    #[serde(default)]
    pub failure_probability: f64,
    #[serde(default)]
    pub failure_seed: u64,
}

impl ToolSpec {
    pub fn new(name: impl Into<String>, description: impl Into<String>, handler: ToolHandler) -> Self {
        ToolSpec {
            name: name.into(),
            description: description.into(),
            parameters: None,
            handler,
            ticks: default_ticks(),
            timeout_ticks: default_timeout(),
            failure_probability: 0.0,
            failure_seed: 0,
        }
    }

    pub fn with_failure(mut self, probability: f64, seed: u64) -> Self {
        self.failure_probability = probability;
        self.failure_seed = seed;
        self
    }

    pub fn schema(&self) -> Vec<ParamSpec> {
        self.parameters.clone().unwrap_or_else(|| self.handler.default_schema())
    }
}

/// Lower-case, collapse whitespace, drop surrounding punctuation.
pub fn normalize_key(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
        .trim_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace())
        .to_string()
}

pub(crate) fn run_pure(handler: &ToolHandler, params: &Parameters) -> Outcome {
    let arg = |name: &str| params.get(name).map(String::as_str).unwrap_or("");
    match handler {
        ToolHandler::Calculator => match evaluate(arg("expression")) {
            Ok(v) => Outcome::success(format_number(v)),
            Err(e) => Outcome::tool_error(e),
        },
        ToolHandler::Lookup { table, fallback } => {
            let key = normalize_key(arg("query"));
            let hit = table.iter().find(|(k, _)| normalize_key(k) == key).map(|(_, v)| v.clone());
            match hit.or_else(|| fallback.clone()) {
                Some(v) => Outcome::success(v),
                None => Outcome::tool_error(format!("no entry for {key}")),
            }
        }
        ToolHandler::Extract => {
            let text = arg("text").trim();
            let end = text
                .char_indices()
                .find(|(_, c)| matches!(c, '.' | '!' | '?'))
                .map(|(i, c)| i + c.len_utf8())
                .unwrap_or(text.len());
            if text.is_empty() {
                Outcome::tool_error("nothing to extract from empty text")
            } else {
                Outcome::success(text[..end].trim())
            }
        }
        ToolHandler::Echo => Outcome::success(arg("text")),
        ToolHandler::Fail { message } => Outcome::tool_error(message.clone()),
        ToolHandler::Go | ToolHandler::Look | ToolHandler::Take | ToolHandler::Put => {
            Outcome::tool_error("no environment is loaded")
        }
    }
}

fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        let s = format!("{v:.6}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Recursive-descent arithmetic evaluator.
pub fn evaluate(expression: &str) -> Result<f64, String> {
    struct P<'a> {
        s: &'a [u8],
        i: usize,
    }
    impl P<'_> {
        fn ws(&mut self) {
            while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
                self.i += 1;
            }
        }
        fn peek(&mut self) -> Option<u8> {
            self.ws();
            self.s.get(self.i).copied()
        }
        fn expr(&mut self) -> Result<f64, String> {
            let mut v = self.term()?;
            while let Some(op @ (b'+' | b'-')) = self.peek() {
                self.i += 1;
                let r = self.term()?;
                v = if op == b'+' { v + r } else { v - r };
            }
            Ok(v)
        }
        fn term(&mut self) -> Result<f64, String> {
            let mut v = self.factor()?;
            while let Some(op @ (b'*' | b'/')) = self.peek() {
                self.i += 1;
                let r = self.factor()?;
                if op == b'/' && r == 0.0 {
                    return Err("division by zero".into());
                }
                v = if op == b'*' { v * r } else { v / r };
            }
            Ok(v)
        }
        fn factor(&mut self) -> Result<f64, String> {
            match self.peek() {
                Some(b'-') => {
                    self.i += 1;
                    Ok(-self.factor()?)
                }
                Some(b'(') => {
                    self.i += 1;
                    let v = self.expr()?;
                    if self.peek() != Some(b')') {
                        return Err("unbalanced parenthesis".into());
                    }
                    self.i += 1;
                    Ok(v)
                }
                Some(c) if c.is_ascii_digit() || c == b'.' => {
                    let start = self.i;
                    while self.i < self.s.len() && (self.s[self.i].is_ascii_digit() || self.s[self.i] == b'.') {
                        self.i += 1;
                    }
                    let text = std::str::from_utf8(&self.s[start..self.i]).expect("ascii");
                    text.parse().map_err(|_| format!("bad number {text}"))
                }
                Some(c) => Err(format!("unexpected character {}", c as char)),
                None => Err("unexpected end of expression".into()),
            }
        }
    }
    let mut p = P { s: expression.as_bytes(), i: 0 };
    let v = p.expr()?;
    if p.peek().is_some() {
        return Err(format!("trailing input at offset {}", p.i));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(pairs: &[(&str, &str)]) -> Parameters {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn calculator_golden() {
        for (expr, out) in [("2+2", "4"), ("2 * (3 + 4)", "14"), ("7/2", "3.5"), ("-3+1", "-2"), ("1/3", "0.333333")] {
            assert_eq!(run_pure(&ToolHandler::Calculator, &params(&[("expression", expr)])).payload, out);
        }
        assert!(run_pure(&ToolHandler::Calculator, &params(&[("expression", "1/0")])).is_error());
        assert!(run_pure(&ToolHandler::Calculator, &params(&[("expression", "2+")])).is_error());
    }

    #[test]
    fn lookup_golden() {
        let handler = ToolHandler::Lookup {
            table: BTreeMap::from([("Who wrote Hamlet?".to_string(), "William Shakespeare".to_string())]),
            fallback: None,
        };
        let out = run_pure(&handler, &params(&[("query", "  who wrote   hamlet ")]));
        assert_eq!(out, Outcome::success("William Shakespeare"));
        assert_eq!(
            run_pure(&handler, &params(&[("query", "who wrote faust")])),
            Outcome::tool_error("no entry for who wrote faust")
        );
    }

    #[test]
    fn extract_golden() {
        let out = run_pure(&ToolHandler::Extract, &params(&[("text", "Turing was born in 1912. He died in 1954.")]));
        assert_eq!(out.payload, "Turing was born in 1912.");
        let out = run_pure(&ToolHandler::Extract, &params(&[("text", "no terminator")]));
        assert_eq!(out.payload, "no terminator");
    }
}
