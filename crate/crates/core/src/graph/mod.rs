//! Heterogeneous graph construction from a schema and its payloads.

mod export;
mod summary;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

pub use export::{export_graph, MANIFEST_FILE};
pub use summary::{graph_summary, EdgeSummary, GraphSummary, NodeSummary};

use crate::error::GraphError;
use crate::ingest::Database;
use crate::schema::{DataType, DatasetSchema, LinkTarget};
use crate::value::Value;

/// Suffix of the reverse twin of every relation.
pub const REV_SUFFIX: &str = "_rev";

/// Which tables may become edge types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildMode {
    /// Every table is a node type.
    Row2node,
    /// Tables with exactly two foreign keys and no primary key become edge types.
    Row2nodeEdge,
}

impl BuildMode {
    pub const ALL: [BuildMode; 2] = [BuildMode::Row2node, BuildMode::Row2nodeEdge];

    pub fn as_str(self) -> &'static str {
        match self {
            BuildMode::Row2node => "row2node",
            BuildMode::Row2nodeEdge => "row2node_edge",
        }
    }
}

impl FromStr for BuildMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "row2node" => Ok(BuildMode::Row2node),
            "row2node_edge" => Ok(BuildMode::Row2nodeEdge),
            other => Err(format!("unknown build mode '{other}' (expected row2node or row2node_edge)")),
        }
    }
}

impl fmt::Display for BuildMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Node,
    Edge,
    DummyNode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRole {
    pub table: String,
    pub role: Role,
}

/// Assigns a role to every declared and dummy table. The second element
/// holds warnings for key-only tables that cannot become edges.
pub fn classify_tables(schema: &DatasetSchema, mode: BuildMode) -> (Vec<TableRole>, Vec<String>) {
    let mut roles = Vec::new();
    let mut warnings = Vec::new();
    for t in &schema.tables {
        let fks = t.foreign_keys().count();
        let role = match mode {
            BuildMode::Row2nodeEdge if t.primary_key().is_none() && fks == 2 => Role::Edge,
            BuildMode::Row2nodeEdge if t.primary_key().is_none() && fks > 2 => {
                warnings.push(format!("table {} has {fks} foreign keys and no primary key; kept as a node type", t.name));
                Role::Node
            }
            _ => Role::Node,
        };
        roles.push(TableRole { table: t.name.clone(), role });
    }
    for d in &schema.derived {
        roles.push(TableRole { table: d.name.clone(), role: Role::DummyNode });
    }
    (roles, warnings)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeType {
    pub name: String,
    pub count: usize,
    pub is_dummy: bool,
    /// Non-key columns, including any label column.
    pub features: IndexMap<String, Vec<Value>>,
    pub feature_dtypes: IndexMap<String, DataType>,
    pub timestamps: Option<Vec<Value>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeType {
    pub src: String,
    pub relation: String,
    pub dst: String,
    pub src_index: Vec<usize>,
    pub dst_index: Vec<usize>,
    pub features: IndexMap<String, Vec<Value>>,
    pub timestamps: Option<Vec<Value>>,
    /// Set on the auto-generated twin.
    pub reverse_of: Option<String>,
}

impl EdgeType {
    pub fn len(&self) -> usize {
        self.src_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src_index.is_empty()
    }

    fn reversed(&self) -> EdgeType {
        EdgeType {
            src: self.dst.clone(),
            relation: format!("{}{REV_SUFFIX}", self.relation),
            dst: self.src.clone(),
            src_index: self.dst_index.clone(),
            dst_index: self.src_index.clone(),
            features: self.features.clone(),
            timestamps: self.timestamps.clone(),
            reverse_of: Some(self.relation.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HeteroGraph {
    pub node_types: IndexMap<String, NodeType>,
    /// Forward relations in schema order, each followed by its twin.
    pub edge_types: Vec<EdgeType>,
}

impl HeteroGraph {
    pub fn relation(&self, name: &str) -> Option<&EdgeType> {
        self.edge_types.iter().find(|e| e.relation == name)
    }

    pub fn node_count(&self, node_type: &str) -> usize {
        self.node_types.get(node_type).map_or(0, |n| n.count)
    }

    pub fn total_nodes(&self) -> usize {
        self.node_types.values().map(|n| n.count).sum()
    }

    pub fn total_edges(&self) -> usize {
        self.edge_types.iter().map(EdgeType::len).sum()
    }
}

/// A graph plus notes about dropped links.
#[derive(Debug, Clone, PartialEq)]
pub struct Built {
    pub graph: HeteroGraph,
    pub roles: Vec<TableRole>,
    pub warnings: Vec<String>,
}

/// Maps FK cells of one link target to node indices.
struct Resolver<'a> {
    schema: &'a DatasetSchema,
    data: &'a Database,
    rows: HashMap<String, HashMap<String, usize>>,
}

impl<'a> Resolver<'a> {
    fn new(schema: &'a DatasetSchema, data: &'a Database) -> Self {
        Self { schema, data, rows: HashMap::new() }
    }

    /// Node index per cell; `None` for nulls and unmatched values.
    fn resolve(&mut self, table: &str, column: &str, target: &LinkTarget) -> Result<(Vec<Option<usize>>, usize), GraphError> {
        let cells = self.data.column(table, column).unwrap_or(&[]);
        let mut unmatched = 0;
        if self.schema.is_dummy(&target.table) {
            let size = self.data.key_spaces.get(&target.table).map_or(0, |s| s.len());
            let mut out = Vec::with_capacity(cells.len());
            for v in cells {
                if v.is_nan() {
                    out.push(None);
                    continue;
                }
                match v.as_i64() {
                    Some(c) if c >= 0 && (c as usize) < size => out.push(Some(c as usize)),
                    _ => {
                        return Err(GraphError::CodeOutOfRange {
                            table: table.into(),
                            column: column.into(),
                            code: v.to_string(),
                            size,
                        })
                    }
                }
            }
            return Ok((out, 0));
        }
        if !self.rows.contains_key(&target.table) {
            let pk = self.data.column(&target.table, &target.column).ok_or_else(|| GraphError::MissingTarget {
                table: table.into(),
                column: column.into(),
                target: target.to_string(),
            })?;
            let index = pk.iter().enumerate().filter_map(|(i, v)| v.join_key().map(|k| (k, i))).collect();
            self.rows.insert(target.table.clone(), index);
        }
        let index = &self.rows[&target.table];
        let out = cells
            .iter()
            .map(|v| {
                let k = v.join_key()?;
                let hit = index.get(&k).copied();
                if hit.is_none() {
                    unmatched += 1;
                }
                hit
            })
            .collect();
        Ok((out, unmatched))
    }
}

fn pick<T: Clone>(values: &[T], rows: &[usize]) -> Vec<T> {
    rows.iter().map(|&r| values[r].clone()).collect()
}

/// Builds the graph. Null links are skipped; FK values without a matching
/// target row are dropped with a warning.
pub fn build_graph(schema: &DatasetSchema, data: &Database, mode: BuildMode) -> Result<Built, GraphError> {
    let (roles, mut warnings) = classify_tables(schema, mode);
    let mut graph = HeteroGraph::default();
    let mut resolver = Resolver::new(schema, data);

    for role in &roles {
        match role.role {
            Role::Edge => {}
            Role::Node => {
                let t = schema.table(&role.table).expect("classified from schema");
                let payload = data.table(&t.name);
                let mut node = NodeType {
                    name: t.name.clone(),
                    count: payload.map_or(0, |p| p.row_count),
                    is_dummy: false,
                    features: IndexMap::new(),
                    feature_dtypes: IndexMap::new(),
                    timestamps: None,
                };
                for c in t.columns.iter().filter(|c| !c.dtype.is_key()) {
                    if Some(&c.name) == t.time_column.as_ref() {
                        node.timestamps = data.column(&t.name, &c.name).map(<[Value]>::to_vec);
                    } else if let Some(v) = data.column(&t.name, &c.name) {
                        node.features.insert(c.name.clone(), v.to_vec());
                        node.feature_dtypes.insert(c.name.clone(), c.dtype);
                    }
                }
                graph.node_types.insert(t.name.clone(), node);
            }
            Role::DummyNode => {
                let space = data.key_spaces.get(&role.table).cloned().unwrap_or_default();
                let key = &schema.dummy(&role.table).expect("classified from schema").key_column;
                let mut features = IndexMap::new();
                features.insert(key.clone(), space.values.clone());
                let mut feature_dtypes = IndexMap::new();
                feature_dtypes.insert(key.clone(), DataType::Category);
                graph.node_types.insert(
                    role.table.clone(),
                    NodeType {
                        name: role.table.clone(),
                        count: space.len(),
                        is_dummy: true,
                        features,
                        feature_dtypes,
                        timestamps: None,
                    },
                );
            }
        }
    }

    for role in &roles {
        let Some(t) = schema.table(&role.table) else { continue };
        let times = t.time_column.as_ref().and_then(|c| data.column(&t.name, c));
        match role.role {
            Role::DummyNode => {}
            Role::Node => {
                for fk in t.foreign_keys() {
                    let target = fk.link_to.as_ref().expect("valid schema");
                    let (resolved, unmatched) = resolver.resolve(&t.name, &fk.name, target)?;
                    if unmatched > 0 {
                        warnings.push(format!("{}.{}: {unmatched} values without a row in {target} dropped", t.name, fk.name));
                    }
                    let rows: Vec<usize> = (0..resolved.len()).filter(|&i| resolved[i].is_some()).collect();
                    let edge = EdgeType {
                        src: t.name.clone(),
                        relation: format!("{}.{}", t.name, fk.name),
                        dst: target.table.clone(),
                        dst_index: rows.iter().map(|&i| resolved[i].expect("filtered")).collect(),
                        src_index: rows.clone(),
                        features: IndexMap::new(),
                        timestamps: times.map(|ts| pick(ts, &rows)),
                        reverse_of: None,
                    };
                    let rev = edge.reversed();
                    graph.edge_types.push(edge);
                    graph.edge_types.push(rev);
                }
            }
            Role::Edge => {
                let fks: Vec<_> = t.foreign_keys().collect();
                let (a, b) = (fks[0], fks[1]);
                let (ta, tb) = (a.link_to.as_ref().expect("valid schema"), b.link_to.as_ref().expect("valid schema"));
                let (ra, ua) = resolver.resolve(&t.name, &a.name, ta)?;
                let (rb, ub) = resolver.resolve(&t.name, &b.name, tb)?;
                if ua + ub > 0 {
                    warnings.push(format!("{}: {} endpoint values without a target row dropped", t.name, ua + ub));
                }
                let rows: Vec<usize> = (0..ra.len()).filter(|&i| ra[i].is_some() && rb[i].is_some()).collect();
                let mut features = IndexMap::new();
                for c in t.columns.iter().filter(|c| !c.dtype.is_key() && Some(&c.name) != t.time_column.as_ref()) {
                    if let Some(v) = data.column(&t.name, &c.name) {
                        features.insert(c.name.clone(), pick(v, &rows));
                    }
                }
                let edge = EdgeType {
                    src: ta.table.clone(),
                    relation: t.name.clone(),
                    dst: tb.table.clone(),
                    src_index: rows.iter().map(|&i| ra[i].expect("filtered")).collect(),
                    dst_index: rows.iter().map(|&i| rb[i].expect("filtered")).collect(),
                    features,
                    timestamps: times.map(|ts| pick(ts, &rows)),
                    reverse_of: None,
                };
                let rev = edge.reversed();
                graph.edge_types.push(edge);
                graph.edge_types.push(rev);
            }
        }
    }
    Ok(Built { graph, roles, warnings })
}
