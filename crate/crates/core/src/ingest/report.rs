use std::fmt::Write;

use super::profile::{ColumnProfile, Profiles, ValueKind};
use crate::schema::{ColumnKey, DatasetSchema};
use crate::value::Value;

/// Stats line printed in place of statistics for vector columns.
pub const MULTIDIM_SENTENCE: &str = "Column is multi-dimensional. Probably an embedding type. Usually not of interest";

/// Renders sampled values the way numpy prints a 1-D array: numbers are
/// right-aligned to a common width, strings are quoted.
pub fn format_sample_values(values: &[Value]) -> String {
    let numeric = values.iter().all(|v| matches!(v, Value::Int(_) | Value::Float(_) | Value::Null));
    let cells: Vec<String> = values
        .iter()
        .map(|v| match v {
            Value::Str(s) => format!("'{s}'"),
            other => other.to_string(),
        })
        .collect();
    if numeric {
        let width = cells.iter().map(String::len).max().unwrap_or(0);
        let padded: Vec<String> = cells.iter().map(|c| format!("{c:>width$}")).collect();
        format!("[{}]", padded.join(" "))
    } else {
        format!("[{}]", cells.join(" "))
    }
}

fn render_column(out: &mut String, name: &str, p: &ColumnProfile) {
    writeln!(out, "  Column: {name}").unwrap();
    if p.is_multidimensional {
        writeln!(out, "{MULTIDIM_SENTENCE}").unwrap();
        return;
    }
    if let (Some(max), Some(min)) = (&p.max, &p.min) {
        writeln!(out, "    Max: {max}").unwrap();
        writeln!(out, "    Min: {min}").unwrap();
    }
    match &p.mode {
        Some(m) => writeln!(out, "    Mode: {m}").unwrap(),
        None => writeln!(out, "    Mode: nan").unwrap(),
    }
    writeln!(out, "    Sampled Values: {}", format_sample_values(&p.samples)).unwrap();
    writeln!(out, "    Number of Unique Values: {}", p.uniques).unwrap();
    if p.kind == ValueKind::List {
        writeln!(out, "    Number of Unique Values After Expanding: {}", p.expanded_uniques.unwrap_or(0)).unwrap();
    }
    writeln!(out, "    Number of nan values: {}", p.nan_count).unwrap();
}

/// One "Analysis for Table" stanza per declared table with profiled
/// columns, separated by blank lines.
pub fn render_stats_report(schema: &DatasetSchema, profiles: &Profiles) -> String {
    let mut stanzas = Vec::new();
    for t in &schema.tables {
        let mut block = String::new();
        for c in &t.columns {
            if let Some(p) = profiles.get(&ColumnKey::new(&t.name, &c.name)) {
                render_column(&mut block, &c.name, p);
            }
        }
        if !block.is_empty() {
            stanzas.push(format!("Analysis for Table {}:\n{block}", t.name));
        }
    }
    stanzas.join("\n")
}
