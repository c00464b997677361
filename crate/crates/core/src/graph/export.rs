use std::path::Path;

use indexmap::IndexMap;
use serde_json::json;

use super::HeteroGraph;
use crate::error::GraphError;
use crate::ingest::columnar::write_parquet;
use crate::value::Value;

pub const MANIFEST_FILE: &str = "manifest.json";

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' }).collect()
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> GraphError + '_ {
    move |source| GraphError::Io { path: path.to_path_buf(), source }
}

/// Writes `nodes/<type>.pqt`, `edges/<relation>.pqt` and a JSON manifest.
///
/// Node files hold an `index` column plus features and an optional
/// `timestamp`; edge files hold `src`, `dst`, features and `timestamp`.
pub fn export_graph(graph: &HeteroGraph, dir: &Path) -> Result<(), GraphError> {
    let (nodes_dir, edges_dir) = (dir.join("nodes"), dir.join("edges"));
    std::fs::create_dir_all(&nodes_dir).map_err(io(&nodes_dir))?;
    std::fs::create_dir_all(&edges_dir).map_err(io(&edges_dir))?;

    let mut node_entries = Vec::new();
    for n in graph.node_types.values() {
        let mut cols: IndexMap<String, Vec<Value>> = IndexMap::new();
        cols.insert("index".into(), (0..n.count as i64).map(Value::Int).collect());
        cols.extend(n.features.iter().map(|(k, v)| (k.clone(), v.clone())));
        if let Some(ts) = &n.timestamps {
            cols.insert("timestamp".into(), ts.clone());
        }
        let file = format!("nodes/{}.pqt", file_stem(&n.name));
        write_parquet(&dir.join(&file), &n.name, &cols)?;
        let dtypes: IndexMap<&String, &str> = n.feature_dtypes.iter().map(|(k, d)| (k, d.canonical())).collect();
        node_entries.push(json!({
            "name": n.name,
            "count": n.count,
            "dummy": n.is_dummy,
            "file": file,
            "features": dtypes,
            "has_timestamps": n.timestamps.is_some(),
        }));
    }

    let mut edge_entries = Vec::new();
    for e in &graph.edge_types {
        let mut cols: IndexMap<String, Vec<Value>> = IndexMap::new();
        cols.insert("src".into(), e.src_index.iter().map(|&i| Value::Int(i as i64)).collect());
        cols.insert("dst".into(), e.dst_index.iter().map(|&i| Value::Int(i as i64)).collect());
        cols.extend(e.features.iter().map(|(k, v)| (k.clone(), v.clone())));
        if let Some(ts) = &e.timestamps {
            cols.insert("timestamp".into(), ts.clone());
        }
        let file = format!("edges/{}.pqt", file_stem(&e.relation));
        write_parquet(&dir.join(&file), &e.relation, &cols)?;
        edge_entries.push(json!({
            "src": e.src,
            "relation": e.relation,
            "dst": e.dst,
            "count": e.len(),
            "file": file,
            "reverse_of": e.reverse_of,
            "features": e.features.keys().collect::<Vec<_>>(),
            "has_timestamps": e.timestamps.is_some(),
        }));
    }

    let manifest = json!({ "node_types": node_entries, "edge_types": edge_entries });
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(io(&path))
}
