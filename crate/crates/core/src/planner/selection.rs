use std::fmt;
use std::sync::OnceLock;

use indexmap::IndexMap;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::actions::{Action, ActionKind};

/// Parsed `<selection>` payload. `terminal` is set by `None` or by a
/// `none` entry, which also ends the list.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Selection {
    pub actions: Vec<Action>,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionError {
    /// One of `no-selection`, `unparseable`, `not-a-list`, `bad-entry`,
    /// `unknown-action`, `missing-parameter`.
    pub code: String,
    pub message: String,
    /// 1-based entry the error refers to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry: Option<usize>,
}

impl SelectionError {
    fn new(code: &str, message: impl Into<String>, entry: Option<usize>) -> Self {
        Self { code: code.into(), message: message.into(), entry }
    }
}

impl fmt::Display for SelectionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.entry {
            Some(i) => write!(f, "{}: entry {i}: {}", self.code, self.message),
            None => write!(f, "{}: {}", self.code, self.message),
        }
    }
}

impl std::error::Error for SelectionError {}

fn block_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)<selection>(.*?)</selection>").expect("valid regex"))
}

/// Python-tuple parentheses outside string literals become brackets.
fn tuples_to_arrays(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for c in text.chars() {
        match quote {
            Some(q) => {
                if escaped {
                    escaped = false;
                } else if c == '\\' {
                    escaped = true;
                } else if c == q {
                    quote = None;
                }
                out.push(c);
            }
            None => match c {
                '"' | '\'' => {
                    quote = Some(c);
                    out.push(c);
                }
                '(' => out.push('['),
                ')' => out.push(']'),
                _ => out.push(c),
            },
        }
    }
    out
}

/// Parses JSON5 (single quotes, bare keys, trailing commas), also trying
/// the text with doubled braces collapsed: first only `{{`, then both.
pub fn parse_lenient(text: &str) -> Option<serde_json::Value> {
    let base = tuples_to_arrays(text.trim());
    let variants = [base.clone(), base.replace("{{", "{"), base.replace("{{", "{").replace("}}", "}")];
    variants.iter().find_map(|v| json5::from_str::<serde_json::Value>(v).ok())
}

fn entry_to_action(i: usize, v: &serde_json::Value) -> Result<Action, SelectionError> {
    let obj = v.as_object().ok_or_else(|| SelectionError::new("bad-entry", "entry is not an object", Some(i)))?;
    let action = obj
        .get("action")
        .and_then(|a| a.as_str())
        .ok_or_else(|| SelectionError::new("bad-entry", "entry has no string 'action'", Some(i)))?
        .trim()
        .to_string();
    let parameters: IndexMap<String, serde_json::Value> = match obj.get("parameters") {
        None | Some(serde_json::Value::Null) => IndexMap::new(),
        Some(serde_json::Value::Object(m)) => m.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
        Some(_) => return Err(SelectionError::new("bad-entry", "'parameters' is not an object", Some(i))),
    };
    let explanation = match obj.get("explanation") {
        Some(serde_json::Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
        None => String::new(),
    };
    Ok(Action { explanation, action, parameters })
}

/// Reads the last `<selection>` block of a completion.
pub fn parse_selection(completion: &str) -> Result<Selection, SelectionError> {
    let body = block_re()
        .captures_iter(completion)
        .last()
        .map(|c| c[1].trim().to_string())
        .ok_or_else(|| SelectionError::new("no-selection", "completion has no <selection>...</selection> block", None))?;
    let bare = body.trim_matches(|c| c == '"' || c == '\'' || char::is_whitespace(c));
    if bare.eq_ignore_ascii_case("none") {
        return Ok(Selection { actions: vec![], terminal: true });
    }
    let value = parse_lenient(&body)
        .ok_or_else(|| SelectionError::new("unparseable", "selection payload is not a JSON list of actions", None))?;
    let entries = match value {
        serde_json::Value::Array(items) => items,
        obj @ serde_json::Value::Object(_) => vec![obj],
        serde_json::Value::Null => return Ok(Selection { actions: vec![], terminal: true }),
        _ => return Err(SelectionError::new("not-a-list", "selection payload is not a list", None)),
    };
    let mut out = Selection::default();
    for (i, v) in entries.iter().enumerate() {
        let action = entry_to_action(i + 1, v)?;
        let kind = action.check().map_err(|e| SelectionError::new(&e.code, e.message, Some(i + 1)))?;
        if kind == ActionKind::None {
            out.terminal = true;
            break;
        }
        out.actions.push(action);
    }
    if out.actions.is_empty() {
        out.terminal = true;
    }
    Ok(out)
}
