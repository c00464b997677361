//! The RDB-style schema language: typed tables, PK/FK links and implicit
//! dummy tables.

mod validate;
mod yaml;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use validate::{validate_schema, Violation};
pub use yaml::{parse_schema, serialize_schema};

use crate::error::SchemaError;

/// Column data types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataType {
    PrimaryKey,
    ForeignKey,
    Category,
    Numeric,
    Text,
    MultiCategory,
    Timestamp,
    Embedding,
}

impl DataType {
    pub const ALL: [DataType; 8] = [
        DataType::PrimaryKey,
        DataType::ForeignKey,
        DataType::Category,
        DataType::Numeric,
        DataType::Text,
        DataType::MultiCategory,
        DataType::Timestamp,
        DataType::Embedding,
    ];

    /// Spelling emitted in schema files.
    pub fn canonical(self) -> &'static str {
        match self {
            DataType::PrimaryKey => "primary_key",
            DataType::ForeignKey => "foreign_key",
            DataType::Category => "category",
            DataType::Numeric => "float",
            DataType::Text => "text",
            DataType::MultiCategory => "multi_category",
            DataType::Timestamp => "datetime",
            DataType::Embedding => "embedding",
        }
    }

    pub fn is_key(self) -> bool {
        matches!(self, DataType::PrimaryKey | DataType::ForeignKey)
    }
}

impl FromStr for DataType {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "primary_key" => DataType::PrimaryKey,
            "foreign_key" => DataType::ForeignKey,
            "category" | "categorical" => DataType::Category,
            "numeric" | "float" => DataType::Numeric,
            "text" => DataType::Text,
            "multi_category" | "set" => DataType::MultiCategory,
            "timestamp" | "datetime" => DataType::Timestamp,
            "embedding" => DataType::Embedding,
            other => return Err(SchemaError::UnknownDtype(other.to_string())),
        })
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical())
    }
}

/// Physical payload format of a table source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableFormat {
    Parquet,
    Csv,
    /// Named-array container (`.npz`).
    Numpy,
}

impl TableFormat {
    pub fn canonical(self) -> &'static str {
        match self {
            TableFormat::Parquet => "parquet",
            TableFormat::Csv => "csv",
            TableFormat::Numpy => "numpy",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            TableFormat::Parquet => "pqt",
            TableFormat::Csv => "csv",
            TableFormat::Numpy => "npz",
        }
    }
}

impl FromStr for TableFormat {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "parquet" => TableFormat::Parquet,
            "csv" => TableFormat::Csv,
            "numpy" | "npz" => TableFormat::Numpy,
            other => return Err(SchemaError::UnknownFormat(other.to_string())),
        })
    }
}

/// A `Table.Column` reference.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinkTarget {
    pub table: String,
    pub column: String,
}

impl LinkTarget {
    pub fn new(table: impl Into<String>, column: impl Into<String>) -> Self {
        Self { table: table.into(), column: column.into() }
    }
}

impl FromStr for LinkTarget {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (table, column) = s
            .split_once('.')
            .ok_or_else(|| SchemaError::BadLink(s.to_string()))?;
        if !is_identifier(table) || !is_identifier(column) {
            return Err(SchemaError::BadLink(s.to_string()));
        }
        Ok(LinkTarget::new(table, column))
    }
}

impl fmt::Display for LinkTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    pub dtype: DataType,
    pub link_to: Option<LinkTarget>,
    pub description: Option<String>,
}

impl ColumnDef {
    pub fn new(name: impl Into<String>, dtype: DataType) -> Self {
        Self { name: name.into(), dtype, link_to: None, description: None }
    }

    pub fn foreign_key(name: impl Into<String>, target: LinkTarget) -> Self {
        Self { name: name.into(), dtype: DataType::ForeignKey, link_to: Some(target), description: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableDef {
    pub name: String,
    pub source: String,
    pub format: TableFormat,
    pub columns: Vec<ColumnDef>,
    pub time_column: Option<String>,
}

impl TableDef {
    pub fn new(name: impl Into<String>, source: impl Into<String>, format: TableFormat) -> Self {
        Self { name: name.into(), source: source.into(), format, columns: Vec::new(), time_column: None }
    }

    pub fn with_column(mut self, column: ColumnDef) -> Self {
        self.columns.push(column);
        self
    }

    pub fn column(&self, name: &str) -> Option<&ColumnDef> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_mut(&mut self, name: &str) -> Option<&mut ColumnDef> {
        self.columns.iter_mut().find(|c| c.name == name)
    }

    pub fn primary_key(&self) -> Option<&ColumnDef> {
        self.columns.iter().find(|c| c.dtype == DataType::PrimaryKey)
    }

    pub fn foreign_keys(&self) -> impl Iterator<Item = &ColumnDef> {
        self.columns.iter().filter(|c| c.dtype == DataType::ForeignKey)
    }
}

/// A (table, column) reference to a concrete column.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColumnKey {
    pub table: String,
    pub column: String,
}

impl ColumnKey {
    pub fn new(table: impl Into<String>, column: impl Into<String>) -> Self {
        Self { table: table.into(), column: column.into() }
    }
}

impl fmt::Display for ColumnKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table, self.column)
    }
}

/// An implicit single-column key table, known only through `link_to`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DummyTableRef {
    pub name: String,
    pub key_column: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub dataset_name: String,
    pub tables: Vec<TableDef>,
    pub derived: BTreeSet<DummyTableRef>,
}

impl DatasetSchema {
    pub fn new(dataset_name: impl Into<String>) -> Self {
        Self { dataset_name: dataset_name.into(), ..Default::default() }
    }

    pub fn table(&self, name: &str) -> Option<&TableDef> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn table_mut(&mut self, name: &str) -> Option<&mut TableDef> {
        self.tables.iter_mut().find(|t| t.name == name)
    }

    pub fn dummy(&self, name: &str) -> Option<&DummyTableRef> {
        self.derived.iter().find(|d| d.name == name)
    }

    pub fn is_dummy(&self, name: &str) -> bool {
        self.dummy(name).is_some()
    }

    /// True when `name` is taken by a declared or a dummy table.
    pub fn has_table_name(&self, name: &str) -> bool {
        self.table(name).is_some() || self.is_dummy(name)
    }

    /// Every FK column in the schema as (table, column, target).
    pub fn links(&self) -> impl Iterator<Item = (&str, &str, &LinkTarget)> {
        self.tables.iter().flat_map(|t| {
            t.columns
                .iter()
                .filter_map(move |c| c.link_to.as_ref().map(|l| (t.name.as_str(), c.name.as_str(), l)))
        })
    }

    /// FK columns that point at `table`.
    pub fn inbound_links(&self, table: &str) -> Vec<(String, String)> {
        self.links()
            .filter(|(_, _, l)| l.table == table)
            .map(|(t, c, _)| (t.to_string(), c.to_string()))
            .collect()
    }
}

/// How [`resolve_links`] treats link targets naming undeclared tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DummyPolicy {
    /// Undeclared targets become dummy tables.
    Materialize,
    /// The dummy set is fixed; unknown targets stay dangling.
    Frozen,
}

/// Recomputes the dummy-table set from the schema's FK links and drops
/// dummies nothing links to any more.
pub fn resolve_links(schema: &DatasetSchema, policy: DummyPolicy) -> Result<DatasetSchema, SchemaError> {
    let mut out = schema.clone();
    let mut derived = BTreeSet::new();
    for (table, column, target) in schema.links() {
        if let Some(declared) = schema.table(&target.table) {
            match declared.column(&target.column) {
                Some(c) if c.dtype == DataType::PrimaryKey => {}
                _ => {
                    return Err(SchemaError::LinkToNonKey {
                        table: table.to_string(),
                        column: column.to_string(),
                        target: target.to_string(),
                    })
                }
            }
            continue;
        }
        let known = schema.dummy(&target.table).is_some();
        if policy == DummyPolicy::Frozen && !known {
            continue;
        }
        derived.insert(DummyTableRef { name: target.table.clone(), key_column: target.column.clone() });
    }
    out.derived = derived;
    Ok(out)
}

/// Letters, digits and underscore; must not start with a digit.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}
