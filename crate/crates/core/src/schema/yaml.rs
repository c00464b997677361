use std::collections::HashSet;
use std::fmt::Write;

use serde::Deserialize;

use super::{
    is_identifier, resolve_links, ColumnDef, DataType, DatasetSchema, DummyPolicy, LinkTarget, TableDef,
    TableFormat,
};
use crate::error::SchemaError;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchema {
    dataset_name: String,
    #[serde(default)]
    tables: Option<Vec<RawTable>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTable {
    name: String,
    source: String,
    #[serde(default)]
    format: Option<String>,
    #[serde(default)]
    columns: Option<Vec<RawColumn>>,
    #[serde(default)]
    time_column: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawColumn {
    name: String,
    dtype: String,
    #[serde(default)]
    link_to: Option<String>,
    #[serde(default)]
    description: Option<String>,
}

fn format_from_source(source: &str) -> TableFormat {
    match source.rsplit('.').next() {
        Some("csv") => TableFormat::Csv,
        Some("npz") => TableFormat::Numpy,
        _ => TableFormat::Parquet,
    }
}

/// Parses a YAML schema file. Dtype aliases are normalized and dummy tables
/// referenced through `link_to` are collected into `derived`.
pub fn parse_schema(yaml_text: &str) -> Result<DatasetSchema, SchemaError> {
    let raw: RawSchema = serde_yaml::from_str(yaml_text).map_err(|e| {
        let (line, column) = e.location().map(|l| (l.line(), l.column())).unwrap_or((0, 0));
        SchemaError::Syntax { line, column, message: e.to_string() }
    })?;

    let mut schema = DatasetSchema::new(raw.dataset_name);
    let mut table_names = HashSet::new();
    for rt in raw.tables.unwrap_or_default() {
        if !is_identifier(&rt.name) {
            return Err(SchemaError::InvalidIdentifier(rt.name));
        }
        if !table_names.insert(rt.name.clone()) {
            return Err(SchemaError::DuplicateTable(rt.name));
        }
        let format = match rt.format {
            Some(f) => f.parse()?,
            None => format_from_source(&rt.source),
        };
        let mut table = TableDef::new(rt.name, rt.source, format);
        let mut col_names = HashSet::new();
        for rc in rt.columns.unwrap_or_default() {
            if !is_identifier(&rc.name) {
                return Err(SchemaError::InvalidIdentifier(rc.name));
            }
            if !col_names.insert(rc.name.clone()) {
                return Err(SchemaError::DuplicateColumn { table: table.name.clone(), column: rc.name });
            }
            let dtype: DataType = rc.dtype.parse()?;
            let link_to = match (dtype, rc.link_to) {
                (DataType::ForeignKey, Some(l)) => Some(l.parse::<LinkTarget>()?),
                (DataType::ForeignKey, None) => {
                    return Err(SchemaError::MissingLink { table: table.name.clone(), column: rc.name })
                }
                (_, Some(_)) => {
                    return Err(SchemaError::LinkOnNonForeignKey { table: table.name.clone(), column: rc.name })
                }
                (_, None) => None,
            };
            table.columns.push(ColumnDef { name: rc.name, dtype, link_to, description: rc.description });
        }
        table.time_column = rt.time_column;
        schema.tables.push(table);
    }
    resolve_links(&schema, DummyPolicy::Materialize)
}

/// Plain YAML scalar when safe, otherwise a quoted scalar.
fn scalar(s: &str) -> String {
    let plain = !s.is_empty()
        && s.chars().all(|c| c.is_ascii_alphanumeric() || "_-./".contains(c))
        && !s.starts_with(['-', '.'])
        && s.parse::<f64>().is_err()
        && !matches!(
            s.to_ascii_lowercase().as_str(),
            "true" | "false" | "yes" | "no" | "on" | "off" | "null" | "y" | "n"
        );
    if plain {
        s.to_string()
    } else {
        serde_json::to_string(s).expect("string serialization")
    }
}

/// Canonical, deterministic YAML emission. Dummy tables are not emitted as
/// table blocks; they stay implicit in `link_to`.
pub fn serialize_schema(schema: &DatasetSchema) -> String {
    let mut out = String::new();
    writeln!(out, "dataset_name: {}", scalar(&schema.dataset_name)).unwrap();
    if schema.tables.is_empty() {
        out.push_str("tables: []\n");
        return out;
    }
    out.push_str("tables:\n");
    for t in &schema.tables {
        writeln!(out, "  - name: {}", t.name).unwrap();
        writeln!(out, "    source: {}", scalar(&t.source)).unwrap();
        writeln!(out, "    format: {}", t.format.canonical()).unwrap();
        if t.columns.is_empty() {
            out.push_str("    columns: []\n");
        } else {
            out.push_str("    columns:\n");
            for c in &t.columns {
                writeln!(out, "      - name: {}", c.name).unwrap();
                writeln!(out, "        dtype: {}", c.dtype.canonical()).unwrap();
                if let Some(l) = &c.link_to {
                    writeln!(out, "        link_to: {l}").unwrap();
                }
                if let Some(d) = &c.description {
                    writeln!(out, "        description: {}", scalar(d)).unwrap();
                }
            }
        }
        if let Some(tc) = &t.time_column {
            writeln!(out, "    time_column: {tc}").unwrap();
        }
    }
    out
}
