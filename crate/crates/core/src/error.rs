use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unknown dtype '{0}'")]
    UnknownDtype(String),
    #[error("unknown table format '{0}'")]
    UnknownFormat(String),
    #[error("invalid identifier '{0}' (letters, digits and underscore only)")]
    InvalidIdentifier(String),
    #[error("malformed link_to '{0}', expected Table.Column")]
    BadLink(String),
    #[error("duplicate table '{0}'")]
    DuplicateTable(String),
    #[error("duplicate column '{column}' in table '{table}'")]
    DuplicateColumn { table: String, column: String },
    #[error("column {table}.{column} has link_to but is not a foreign_key")]
    LinkOnNonForeignKey { table: String, column: String },
    #[error("foreign_key column {table}.{column} has no link_to")]
    MissingLink { table: String, column: String },
    #[error("{table}.{column} links to {target}, which is not a primary key; use connect_two_columns")]
    LinkToNonKey { table: String, column: String, target: String },
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("table '{table}': declared column '{column}' missing from {path}")]
    MissingColumn { table: String, column: String, path: PathBuf },
    #[error("table '{table}': column '{column}' has {found} rows, expected {expected}")]
    Ragged { table: String, column: String, expected: usize, found: usize },
    #[error("table '{table}': {message}")]
    Format { table: String, message: String },
}

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedder transport failed: {0}")]
    Transport(#[from] std::io::Error),
    #[error("embedder protocol error: {0}")]
    Protocol(String),
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("{table}.{column}: code {code} outside key space of size {size}")]
    CodeOutOfRange { table: String, column: String, code: String, size: usize },
    #[error("{table}.{column}: target {target} has no payload")]
    MissingTarget { table: String, column: String, target: String },
    #[error("unknown relation '{0}'")]
    UnknownRelation(String),
    #[error("relation '{relation}' starts at {found}, expected {expected}")]
    NonComposing { relation: String, expected: String, found: String },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("node or edge type '{0}' not in graph")]
    UnknownTarget(String),
    #[error("label column '{column}' missing on '{target}'")]
    UnknownLabel { target: String, column: String },
    #[error("adjacency has no labeled edges")]
    NoEdges,
    #[error("labels are single-class; adjusted homophily is undefined")]
    SingleClass,
    #[error("no labeled training nodes")]
    NoTrain,
    #[error("metric undefined: {0}")]
    MetricUndefined(String),
    #[error("bad metapath: {0}")]
    BadPath(String),
    #[error("rankings are over different id sets")]
    MismatchedIds,
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("basket is empty")]
    EmptyBasket,
    #[error("external oracle: {0}")]
    External(String),
}
