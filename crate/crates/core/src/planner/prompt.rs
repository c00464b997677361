use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::client::Message;
use crate::actions::{Action, State};
use crate::ingest::{profile_database, render_stats_report, DEFAULT_SAMPLE_SIZE};
use crate::join::{rank_pairs, Method, DEFAULT_TOP_N};
use crate::schema::serialize_schema;

/// Augmentation prompt; a format string with `{slot}` placeholders and
/// doubled literal braces.
pub const AUGMENT_TEMPLATE: &str = include_str!("../../assets/prompts/augment_template.txt");
pub const ACTION_DOCS: &str = include_str!("../../assets/prompts/action_docs.txt");
pub const COT_EXAMPLE: &str = include_str!("../../assets/prompts/cot_example.txt");
pub const INFER_TYPES_PROMPT: &str = include_str!("../../assets/prompts/infer_types.txt");

pub const REFLECTION_PROMPT: &str = "Review your selection above against the action documents, the schema and the \
statistics. Correct any wrong table or column name, missing parameter or invalid action, then output the full \
corrected list again inside <selection></selection>. If it was already correct, repeat it unchanged.";

/// Slots of [`AUGMENT_TEMPLATE`].
pub const SLOTS: [&str; 7] = ["actions", "example", "history_actions", "stats", "task", "input_schema", "jtd"];

/// Python-style formatting: `{name}` takes `values[name]`, `{{` and `}}`
/// are literal braces.
pub fn format_template(template: &str, values: &HashMap<&str, &str>) -> String {
    let mut out = String::with_capacity(template.len() + values.values().map(|v| v.len()).sum::<usize>());
    let mut rest = template;
    while let Some(i) = rest.find(['{', '}']) {
        out.push_str(&rest[..i]);
        let tail = &rest[i..];
        if tail.starts_with("{{") || tail.starts_with("}}") {
            out.push_str(&tail[..1]);
            rest = &tail[2..];
        } else if let Some(end) = tail.strip_prefix('{').and_then(|t| t.find('}')) {
            let name = &tail[1..1 + end];
            match values.get(name) {
                Some(v) => out.push_str(v),
                None => out.push_str(&tail[..end + 2]),
            }
            rest = &tail[end + 2..];
        } else {
            out.push_str(&tail[..1]);
            rest = &tail[1..];
        }
    }
    out.push_str(rest);
    out
}

/// One line of the history slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum HistoryEntry {
    Applied { index: usize, action: Action },
    Failed { index: usize, error: String },
}

impl HistoryEntry {
    pub fn render(&self) -> String {
        match self {
            HistoryEntry::Applied { index, action } => {
                format!("Action {index}: {}", serde_json::to_string(action).expect("action serializes"))
            }
            HistoryEntry::Failed { index, error } => format!("Action {index} failed: {error}"),
        }
    }
}

/// `[]` for an empty history, otherwise one line per entry.
pub fn render_history(history: &[HistoryEntry]) -> String {
    if history.is_empty() {
        return "[]".into();
    }
    history.iter().map(HistoryEntry::render).collect::<Vec<_>>().join("\n")
}

/// Fixed prompt inputs plus the per-state reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptContext {
    pub task: String,
    pub stats: String,
    pub similarity: String,
    pub actions: String,
    pub example: String,
}

impl PromptContext {
    /// Reports computed from `state` with the built-in embedder.
    pub fn from_state(state: &State, task: &str, seed: u64) -> Self {
        let mut ctx = Self {
            task: task.into(),
            stats: String::new(),
            similarity: String::new(),
            actions: ACTION_DOCS.into(),
            example: COT_EXAMPLE.into(),
        };
        ctx.refresh(state, seed);
        ctx
    }

    pub fn refresh(&mut self, state: &State, seed: u64) {
        let decoded = state.data.decoded(&state.schema);
        let profiles = profile_database(&state.schema, &decoded, DEFAULT_SAMPLE_SIZE, seed);
        self.stats = render_stats_report(&state.schema, &profiles);
        self.similarity = rank_pairs(&state.schema, &profiles, &decoded, Method::Embedding, DEFAULT_TOP_N).report;
    }
}

/// The augmentation request for the current state, as one user message.
pub fn assemble_prompt(state: &State, ctx: &PromptContext, history: &[HistoryEntry]) -> Vec<Message> {
    let schema = serialize_schema(&state.schema);
    let history = render_history(history);
    let values: HashMap<&str, &str> = [
        ("actions", ctx.actions.as_str()),
        ("example", ctx.example.as_str()),
        ("history_actions", history.as_str()),
        ("stats", ctx.stats.as_str()),
        ("task", ctx.task.as_str()),
        ("input_schema", schema.as_str()),
        ("jtd", ctx.similarity.as_str()),
    ]
    .into_iter()
    .collect();
    vec![Message::user(format_template(AUGMENT_TEMPLATE, &values))]
}

/// Draft turn followed by the reflection request.
pub fn reflection_messages(messages: &[Message], draft: &str) -> Vec<Message> {
    let mut out = messages.to_vec();
    out.push(Message::assistant(draft));
    out.push(Message::user(REFLECTION_PROMPT));
    out
}
