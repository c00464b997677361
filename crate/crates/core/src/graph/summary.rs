use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::HeteroGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSummary {
    pub name: String,
    pub count: usize,
    pub is_dummy: bool,
    pub features: Vec<String>,
}

/// Out-degree statistics are taken over every source node, isolated ones
/// included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSummary {
    pub src: String,
    pub relation: String,
    pub dst: String,
    pub count: usize,
    pub min_out_degree: usize,
    pub max_out_degree: usize,
    pub mean_out_degree: f64,
    pub features: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GraphSummary {
    pub node_type_count: usize,
    pub edge_type_count: usize,
    pub total_nodes: usize,
    pub total_edges: usize,
    pub node_types: Vec<NodeSummary>,
    /// Sorted by relation name.
    pub edge_types: Vec<EdgeSummary>,
}

impl GraphSummary {
    pub fn render(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{} node types, {} edge types, {} nodes, {} edges",
            self.node_type_count, self.edge_type_count, self.total_nodes, self.total_edges
        )
        .unwrap();
        for n in &self.node_types {
            let kind = if n.is_dummy { " (dummy)" } else { "" };
            writeln!(out, "node {}{kind}: {} nodes; features [{}]", n.name, n.count, n.features.join(", ")).unwrap();
        }
        for e in &self.edge_types {
            writeln!(
                out,
                "edge {} ({} -> {}): {} edges; out-degree min {} max {} mean {:.3}; features [{}]",
                e.relation,
                e.src,
                e.dst,
                e.count,
                e.min_out_degree,
                e.max_out_degree,
                e.mean_out_degree,
                e.features.join(", ")
            )
            .unwrap();
        }
        out
    }
}

pub fn graph_summary(graph: &HeteroGraph) -> GraphSummary {
    let node_types = graph
        .node_types
        .values()
        .map(|n| NodeSummary {
            name: n.name.clone(),
            count: n.count,
            is_dummy: n.is_dummy,
            features: n.features.keys().cloned().collect(),
        })
        .collect();
    let mut edge_types: Vec<EdgeSummary> = graph
        .edge_types
        .iter()
        .map(|e| {
            let n = graph.node_count(&e.src);
            let mut deg = vec![0usize; n];
            for &s in &e.src_index {
                deg[s] += 1;
            }
            EdgeSummary {
                src: e.src.clone(),
                relation: e.relation.clone(),
                dst: e.dst.clone(),
                count: e.len(),
                min_out_degree: deg.iter().copied().min().unwrap_or(0),
                max_out_degree: deg.iter().copied().max().unwrap_or(0),
                mean_out_degree: if n == 0 { 0.0 } else { e.len() as f64 / n as f64 },
                features: e.features.keys().cloned().collect(),
            }
        })
        .collect();
    edge_types.sort_by(|a, b| a.relation.cmp(&b.relation));
    GraphSummary {
        node_type_count: graph.node_types.len(),
        edge_type_count: graph.edge_types.len(),
        total_nodes: graph.total_nodes(),
        total_edges: graph.total_edges(),
        node_types,
        edge_types,
    }
}
