//! Relational-to-graph construction: schema handling, profiling, join
//! discovery, schema-editing actions, graph building, oracle scoring and
//! an LLM-driven planner over the action space.

pub mod actions;
pub mod error;
pub mod fixtures;
pub mod ingest;
pub mod graph;
pub mod join;
pub mod oracle;
pub mod planner;
pub mod schema;
pub mod synth;
pub mod value;

pub use actions::{apply_action, apply_script, Action, ActionError, ActionKind, Applied, ApplyResult, State};
pub use error::{EmbedError, GraphError, IngestError, OracleError, SchemaError};
pub use graph::{build_graph, BuildMode, HeteroGraph};
pub use oracle::{score_candidate, OracleReport, ScorerConfig, Task};
pub use ingest::{Database, KeySpace, TableData};
pub use schema::{
    ColumnDef, ColumnKey, DataType, DatasetSchema, DummyPolicy, DummyTableRef, LinkTarget, TableDef, TableFormat,
};
pub use value::Value;
