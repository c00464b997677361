//! Closed-ended schema transformations with payload migration.
//!
//! Every action works on a copy of the input [`State`] and either returns a
//! new, fully validated state or a machine-readable [`ActionError`].

mod ops;

use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::ingest::Database;
use crate::schema::{resolve_links, validate_schema, DatasetSchema, DummyPolicy};

/// A schema together with its payloads.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub schema: DatasetSchema,
    pub data: Database,
}

impl State {
    /// Builds a state, creating key spaces for dummies that lack one.
    pub fn new(schema: DatasetSchema, mut data: Database) -> Self {
        data.materialize_key_spaces(&schema);
        Self { schema, data }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    GenerateOrConnectDummyTable,
    ConnectTwoColumns,
    ExplodeMultiCategoryColumn,
    GenerateNonDummyTable,
    RemovePrimaryKey,
    AddPrimaryKey,
    None,
}

impl ActionKind {
    pub const ALL: [ActionKind; 7] = [
        ActionKind::GenerateOrConnectDummyTable,
        ActionKind::ConnectTwoColumns,
        ActionKind::ExplodeMultiCategoryColumn,
        ActionKind::GenerateNonDummyTable,
        ActionKind::RemovePrimaryKey,
        ActionKind::AddPrimaryKey,
        ActionKind::None,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::GenerateOrConnectDummyTable => "generate_or_connect_dummy_table",
            ActionKind::ConnectTwoColumns => "connect_two_columns",
            ActionKind::ExplodeMultiCategoryColumn => "explode_multi_category_column",
            ActionKind::GenerateNonDummyTable => "generate_non_dummy_table",
            ActionKind::RemovePrimaryKey => "remove_primary_key",
            ActionKind::AddPrimaryKey => "add_primary_key",
            ActionKind::None => "none",
        }
    }

    /// Parameters that must be present and non-empty.
    pub fn required_parameters(self) -> &'static [&'static str] {
        match self {
            ActionKind::GenerateOrConnectDummyTable => {
                &["base_table_name", "orig_col_name", "new_table_name", "new_col_name"]
            }
            ActionKind::ConnectTwoColumns => &["table_1_name", "table_1_col_name", "table_2_name", "table_2_col_name"],
            ActionKind::ExplodeMultiCategoryColumn => {
                &["original_table", "multi_cat_col", "primary_key_column", "new_table_name", "new_col_name", "dtype"]
            }
            ActionKind::GenerateNonDummyTable => &["base_table_name", "cols", "new_table_name"],
            ActionKind::RemovePrimaryKey | ActionKind::AddPrimaryKey => &["base_table_name", "col_name"],
            ActionKind::None => &[],
        }
    }
}

impl FromStr for ActionKind {
    type Err = ActionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActionKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ActionError::new("unknown-action", format!("unknown action '{s}'")))
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One planner proposal, in the wire shape `{explanation, action, parameters}`.
///
/// The kind stays a string so unknown actions surface as apply errors.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    #[serde(default)]
    pub explanation: String,
    pub action: String,
    #[serde(default)]
    pub parameters: IndexMap<String, serde_json::Value>,
}

impl Action {
    pub fn new<I, K, V>(kind: ActionKind, parameters: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<serde_json::Value>,
    {
        Self {
            explanation: String::new(),
            action: kind.as_str().to_string(),
            parameters: parameters.into_iter().map(|(k, v)| (k.into(), v.into())).collect(),
        }
    }

    pub fn none() -> Self {
        Self::new(ActionKind::None, Vec::<(String, String)>::new())
    }

    pub fn with_explanation(mut self, text: impl Into<String>) -> Self {
        self.explanation = text.into();
        self
    }

    pub fn kind(&self) -> Result<ActionKind, ActionError> {
        self.action.parse()
    }

    /// A string parameter; numbers are accepted and rendered as text.
    /// Absent, null and empty values yield `None`.
    pub fn str_param(&self, name: &str) -> Option<String> {
        match self.parameters.get(name)? {
            serde_json::Value::String(s) if !s.trim().is_empty() => Some(s.trim().to_string()),
            serde_json::Value::Number(n) => Some(n.to_string()),
            _ => None,
        }
    }

    /// A list-of-strings parameter; a bare string is a one-element list.
    pub fn list_param(&self, name: &str) -> Option<Vec<String>> {
        match self.parameters.get(name)? {
            serde_json::Value::Array(items) => Some(
                items
                    .iter()
                    .filter_map(|v| match v {
                        serde_json::Value::String(s) => Some(s.trim().to_string()),
                        serde_json::Value::Number(n) => Some(n.to_string()),
                        _ => None,
                    })
                    .collect(),
            ),
            serde_json::Value::String(s) if !s.trim().is_empty() => Some(vec![s.trim().to_string()]),
            _ => None,
        }
    }

    fn required(&self, name: &str) -> Result<String, ActionError> {
        self.str_param(name).ok_or_else(|| {
            ActionError::new("missing-parameter", format!("{} requires parameter '{name}'", self.action))
                .with_parameter(name)
        })
    }

    /// Checks the kind and the presence of every required parameter.
    pub fn check(&self) -> Result<ActionKind, ActionError> {
        let kind = self.kind()?;
        for p in kind.required_parameters() {
            let present = if *p == "cols" { self.list_param(p).is_some_and(|l| !l.is_empty()) } else { self.str_param(p).is_some() };
            if !present {
                return Err(ActionError::new("missing-parameter", format!("{} requires parameter '{p}'", self.action))
                    .with_parameter(p));
            }
        }
        Ok(kind)
    }
}

/// A failed application. `code` is a stable kebab-case identifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionError {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameter: Option<String>,
}

impl ActionError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self { code: code.to_string(), message: message.into(), parameter: None }
    }

    fn with_parameter(mut self, name: &str) -> Self {
        self.parameter = Some(name.to_string());
        self
    }

    pub fn code(&self) -> &str {
        &self.code
    }
}

impl fmt::Display for ActionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for ActionError {}

/// A successful application.
#[derive(Debug, Clone, PartialEq)]
pub struct Applied {
    pub state: State,
    pub log: String,
    pub warnings: Vec<String>,
    /// Set by the `none` action.
    pub terminal: bool,
}

pub type ApplyResult = Result<Applied, ActionError>;

/// Recomputes dummies and key spaces, then rejects any schema violation.
fn finalize(mut state: State) -> Result<State, ActionError> {
    state.schema = resolve_links(&state.schema, DummyPolicy::Materialize)
        .map_err(|e| ActionError::new("schema-violation", e.to_string()))?;
    state.data.materialize_key_spaces(&state.schema);
    let violations = validate_schema(&state.schema);
    if !violations.is_empty() {
        let text: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(ActionError::new("schema-violation", text.join("; ")));
    }
    Ok(state)
}

/// Applies one action to a copy of `state`.
pub fn apply_action(state: &State, action: &Action) -> ApplyResult {
    let kind = action.check()?;
    if kind == ActionKind::None {
        return Ok(Applied { state: state.clone(), log: "none: stop".into(), warnings: vec![], terminal: true });
    }
    let mut work = state.clone();
    let mut warnings = Vec::new();
    let p = |n: &str| action.required(n);
    let log = match kind {
        ActionKind::GenerateOrConnectDummyTable => ops::generate_or_connect_dummy_table(
            &mut work,
            &p("base_table_name")?,
            &p("orig_col_name")?,
            &p("new_table_name")?,
            &p("new_col_name")?,
        )?,
        ActionKind::ConnectTwoColumns => ops::connect_two_columns(
            &mut work,
            &mut warnings,
            (&p("table_1_name")?, &p("table_1_col_name")?),
            (&p("table_2_name")?, &p("table_2_col_name")?),
            action.str_param("new_table_name").as_deref(),
        )?,
        ActionKind::ExplodeMultiCategoryColumn => ops::explode_multi_category_column(
            &mut work,
            &p("original_table")?,
            &p("multi_cat_col")?,
            &p("primary_key_column")?,
            &p("new_table_name")?,
            &p("new_col_name")?,
            &p("dtype")?,
        )?,
        ActionKind::GenerateNonDummyTable => {
            let cols = action.list_param("cols").unwrap_or_default();
            ops::generate_non_dummy_table(&mut work, &p("base_table_name")?, &cols, &p("new_table_name")?)?
        }
        ActionKind::RemovePrimaryKey => ops::remove_primary_key(&mut work, &p("base_table_name")?, &p("col_name")?)?,
        ActionKind::AddPrimaryKey => ops::add_primary_key(&mut work, &p("base_table_name")?, &p("col_name")?)?,
        ActionKind::None => unreachable!("handled above"),
    };
    let state = finalize(work)?;
    Ok(Applied { state, log, warnings, terminal: false })
}

/// Outcome of a batch replay.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptOutcome {
    /// State after the last successful step.
    pub state: State,
    pub log: Vec<String>,
    pub warnings: Vec<String>,
    /// 1-based index of the failing step and its error.
    pub error: Option<(usize, ActionError)>,
    pub terminated: bool,
}

/// Left fold of [`apply_action`], stopping at the first error or `none`.
pub fn apply_script(state: &State, actions: &[Action]) -> ScriptOutcome {
    let mut out =
        ScriptOutcome { state: state.clone(), log: vec![], warnings: vec![], error: None, terminated: false };
    for (i, action) in actions.iter().enumerate() {
        match apply_action(&out.state, action) {
            Ok(applied) => {
                out.state = applied.state;
                out.log.push(applied.log);
                out.warnings.extend(applied.warnings);
                if applied.terminal {
                    out.terminated = true;
                    break;
                }
            }
            Err(e) => {
                out.error = Some((i + 1, e));
                break;
            }
        }
    }
    out
}

/// Reads an action script: a JSON array of action objects.
pub fn parse_script(text: &str) -> Result<Vec<Action>, serde_json::Error> {
    serde_json::from_str(text)
}

#[cfg(test)]
mod tests;
