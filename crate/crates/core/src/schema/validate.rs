use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{is_identifier, DataType, DatasetSchema};

/// One broken schema rule. Violations are values, not failures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub table: String,
    pub column: Option<String>,
    pub rule: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.column {
            Some(c) => write!(f, "[{}] {}.{}: {}", self.rule, self.table, c, self.message),
            None => write!(f, "[{}] {}: {}", self.rule, self.table, self.message),
        }
    }
}

fn violation(table: &str, column: Option<&str>, rule: &'static str, message: String) -> Violation {
    Violation { table: table.to_string(), column: column.map(str::to_string), rule, message }
}

/// Checks every structural invariant of the schema language.
pub fn validate_schema(schema: &DatasetSchema) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen_tables = HashSet::new();
    for t in &schema.tables {
        if !is_identifier(&t.name) {
            out.push(violation(&t.name, None, "invalid-identifier", "table name is not an identifier".into()));
        }
        if !seen_tables.insert(t.name.as_str()) {
            out.push(violation(&t.name, None, "duplicate-table", "table name declared twice".into()));
        }
        if t.columns.is_empty() {
            out.push(violation(&t.name, None, "empty-table", "table has no columns".into()));
        }
        let mut seen_cols = HashSet::new();
        for c in &t.columns {
            if !is_identifier(&c.name) {
                out.push(violation(&t.name, Some(&c.name), "invalid-identifier", "column name is not an identifier".into()));
            }
            if !seen_cols.insert(c.name.as_str()) {
                out.push(violation(&t.name, Some(&c.name), "duplicate-column", "column declared twice".into()));
            }
            match (c.dtype, &c.link_to) {
                (DataType::ForeignKey, None) => out.push(violation(
                    &t.name,
                    Some(&c.name),
                    "fk-missing-link",
                    "foreign_key column has no link_to".into(),
                )),
                (d, Some(_)) if d != DataType::ForeignKey => out.push(violation(
                    &t.name,
                    Some(&c.name),
                    "link-on-non-fk",
                    format!("link_to on a {d} column"),
                )),
                _ => {}
            }
        }
        let pks = t.columns.iter().filter(|c| c.dtype == DataType::PrimaryKey).count();
        if pks > 1 {
            out.push(violation(&t.name, None, "single-pk", format!("{pks} primary_key columns")));
        }
        if let Some(tc) = &t.time_column {
            match t.column(tc) {
                None => out.push(violation(&t.name, Some(tc), "time-column-missing", "time_column is not a column".into())),
                Some(c) if c.dtype != DataType::Timestamp => out.push(violation(
                    &t.name,
                    Some(tc),
                    "time-column-type",
                    format!("time_column has dtype {}", c.dtype),
                )),
                _ => {}
            }
        }
    }

    let mut dummy_keys: BTreeMap<&str, &str> = BTreeMap::new();
    for d in &schema.derived {
        if schema.table(&d.name).is_some() {
            out.push(violation(&d.name, None, "dummy-collision", "dummy shares a name with a declared table".into()));
        }
        if dummy_keys.insert(&d.name, &d.key_column).is_some() {
            out.push(violation(&d.name, None, "dummy-key-mismatch", "dummy has several key columns".into()));
        }
        if schema.inbound_links(&d.name).is_empty() {
            out.push(violation(&d.name, None, "orphan-dummy", "no column links to this dummy".into()));
        }
    }

    for (table, column, target) in schema.links() {
        if let Some(declared) = schema.table(&target.table) {
            match declared.column(&target.column) {
                Some(c) if c.dtype == DataType::PrimaryKey => {}
                Some(_) => out.push(violation(
                    table,
                    Some(column),
                    "link-non-pk",
                    format!("{target} is not a primary key"),
                )),
                None => out.push(violation(table, Some(column), "dangling-link", format!("{target} does not exist"))),
            }
        } else {
            match dummy_keys.get(target.table.as_str()) {
                Some(key) if *key == target.column => {}
                Some(key) => out.push(violation(
                    table,
                    Some(column),
                    "dummy-key-mismatch",
                    format!("dummy {} is keyed by {key}, not {}", target.table, target.column),
                )),
                None => out.push(violation(table, Some(column), "dangling-link", format!("{target} does not resolve"))),
            }
        }
    }
    out
}
