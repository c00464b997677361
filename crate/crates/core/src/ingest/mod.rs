//! Table payloads, loaders and per-column statistics.

pub mod columnar;
mod infer;
mod load;
mod profile;
mod report;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

pub use infer::{infer_column_type, infer_types, TypeGuess};
pub use load::{load_database, load_table, parse_cell, parse_cell_untyped, write_database, write_table_csv, LoadedTable};
pub use profile::{profile_column, profile_database, ColumnProfile, Profiles, ValueKind, DEFAULT_SAMPLE_SIZE};
pub use report::{format_sample_values, render_stats_report, MULTIDIM_SENTENCE};

use crate::error::IngestError;
use crate::schema::{DataType, DatasetSchema};
use crate::value::Value;

/// Row values of one table, column-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableData {
    pub table_name: String,
    pub columns: IndexMap<String, Vec<Value>>,
    pub row_count: usize,
}

impl TableData {
    pub fn new(table_name: impl Into<String>, columns: IndexMap<String, Vec<Value>>) -> Result<Self, IngestError> {
        let table_name = table_name.into();
        let row_count = columns.values().next().map_or(0, Vec::len);
        for (name, col) in &columns {
            if col.len() != row_count {
                return Err(IngestError::Ragged {
                    table: table_name,
                    column: name.clone(),
                    expected: row_count,
                    found: col.len(),
                });
            }
        }
        Ok(Self { table_name, columns, row_count })
    }

    /// Builds a table from `(name, values)` pairs; panics on ragged input.
    pub fn from_columns<I, S>(table_name: &str, columns: I) -> Self
    where
        I: IntoIterator<Item = (S, Vec<Value>)>,
        S: Into<String>,
    {
        let map = columns.into_iter().map(|(k, v)| (k.into(), v)).collect();
        Self::new(table_name, map).expect("ragged columns")
    }

    pub fn column(&self, name: &str) -> Option<&[Value]> {
        self.columns.get(name).map(Vec::as_slice)
    }
}

/// Decoding table for a dummy-table key space: code `i` stands for
/// `values[i]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct KeySpace {
    pub values: Vec<Value>,
}

impl KeySpace {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index(&self) -> HashMap<String, usize> {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.join_key().map(|k| (k, i)))
            .collect()
    }

    /// Adds unseen values, keeping existing codes stable. Returns the
    /// join-key index of the extended space.
    pub fn extend<'a>(&mut self, values: impl IntoIterator<Item = &'a Value>) -> HashMap<String, usize> {
        let mut index = self.index();
        for v in values {
            if let Some(k) = v.join_key() {
                if !index.contains_key(&k) {
                    index.insert(k, self.values.len());
                    self.values.push(v.clone());
                }
            }
        }
        index
    }

    pub fn decode(&self, cell: &Value) -> Value {
        match cell.as_i64() {
            Some(code) if code >= 0 && (code as usize) < self.values.len() => self.values[code as usize].clone(),
            _ => Value::Null,
        }
    }
}

/// All table payloads of a dataset plus the key spaces of its dummy tables.
///
/// Cells of a foreign key pointing at a dummy table hold integer codes into
/// that dummy's key space once the space exists.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Database {
    pub tables: IndexMap<String, TableData>,
    pub key_spaces: BTreeMap<String, KeySpace>,
}

impl Database {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_table(mut self, table: TableData) -> Self {
        self.insert(table);
        self
    }

    pub fn insert(&mut self, table: TableData) {
        self.tables.insert(table.table_name.clone(), table);
    }

    pub fn table(&self, name: &str) -> Option<&TableData> {
        self.tables.get(name)
    }

    pub fn table_mut(&mut self, name: &str) -> Option<&mut TableData> {
        self.tables.get_mut(name)
    }

    pub fn column(&self, table: &str, column: &str) -> Option<&[Value]> {
        self.tables.get(table).and_then(|t| t.column(column))
    }

    /// Creates key spaces for dummies that have none yet. Each is built from the
    /// sorted distinct raw values of every FK column pointing at them. It
    /// then recodes those columns and drops key spaces of dummies no longer in the
    /// schema.
    pub fn materialize_key_spaces(&mut self, schema: &DatasetSchema) {
        let live: BTreeSet<&str> = schema.derived.iter().map(|d| d.name.as_str()).collect();
        self.key_spaces.retain(|name, _| live.contains(name.as_str()));
        for dummy in &schema.derived {
            if self.key_spaces.contains_key(&dummy.name) {
                continue;
            }
            let inbound = schema.inbound_links(&dummy.name);
            let mut distinct = BTreeSet::new();
            for (t, c) in &inbound {
                if let Some(col) = self.column(t, c) {
                    distinct.extend(col.iter().filter(|v| !v.is_nan()).cloned());
                }
            }
            let mut space = KeySpace::default();
            let index = space.extend(distinct.iter());
            for (t, c) in &inbound {
                if let Some(col) = self.tables.get_mut(t).and_then(|t| t.columns.get_mut(c)) {
                    recode(col, &index);
                }
            }
            self.key_spaces.insert(dummy.name.clone(), space);
        }
    }

    /// Copy with dummy FK codes replaced by their key-space values, the
    /// form written back to payload files.
    pub fn decoded(&self, schema: &DatasetSchema) -> Database {
        let mut out = self.clone();
        for (table, column, target) in schema.links() {
            let Some(space) = self.key_spaces.get(&target.table) else { continue };
            if let Some(col) = out.tables.get_mut(table).and_then(|t| t.columns.get_mut(column)) {
                for cell in col.iter_mut() {
                    if !cell.is_nan() {
                        *cell = space.decode(cell);
                    }
                }
            }
        }
        out.key_spaces.clear();
        out
    }

    /// Columns of the schema with a payload, in schema order.
    pub fn columns_of<'a>(&'a self, schema: &'a DatasetSchema) -> impl Iterator<Item = (&'a str, &'a str, DataType, &'a [Value])> {
        schema.tables.iter().flat_map(move |t| {
            t.columns.iter().filter_map(move |c| {
                self.column(&t.name, &c.name).map(|v| (t.name.as_str(), c.name.as_str(), c.dtype, v))
            })
        })
    }
}

/// Replaces each non-null cell by its code in `index`; unknown values become
/// null.
pub(crate) fn recode(col: &mut [Value], index: &HashMap<String, usize>) {
    for cell in col.iter_mut() {
        *cell = match cell.join_key().and_then(|k| index.get(&k)) {
            Some(&code) => Value::Int(code as i64),
            None => Value::Null,
        };
    }
}
