use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::OracleError;
use crate::graph::{EdgeType, HeteroGraph, REV_SUFFIX};

/// An undirected simple graph over `n` nodes; `edges` holds `(u, v)` with
/// `u < v`, sorted and unique.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Adjacency {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

impl Adjacency {
    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let set: BTreeSet<(usize, usize)> =
            pairs.into_iter().filter(|(u, v)| u != v).map(|(u, v)| (u.min(v), u.max(v))).collect();
        Self { n, edges: set.into_iter().collect() }
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            out[u].push(v);
            out[v].push(u);
        }
        out
    }

    pub fn union(&self, other: &Adjacency) -> Adjacency {
        Adjacency::from_pairs(self.n.max(other.n), self.edges.iter().chain(&other.edges).copied())
    }
}

pub(crate) fn out_lists(e: &EdgeType, n_src: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); n_src];
    for (&s, &d) in e.src_index.iter().zip(&e.dst_index) {
        out[s].push(d);
    }
    out
}

/// Projects `path` onto `node_type`: `u ~ v` iff some walk along the
/// relations joins them, `u != v`.
pub fn metapath_project(graph: &HeteroGraph, node_type: &str, path: &[String]) -> Result<Adjacency, OracleError> {
    let n = graph.node_types.get(node_type).map(|t| t.count).ok_or_else(|| OracleError::UnknownTarget(node_type.into()))?;
    if path.is_empty() {
        return Ok(Adjacency { n, edges: vec![] });
    }
    let mut cur = node_type;
    let mut steps = Vec::new();
    for r in path {
        let e = graph.relation(r).ok_or_else(|| OracleError::BadPath(format!("unknown relation '{r}'")))?;
        if e.src != cur {
            return Err(OracleError::BadPath(format!("relation '{r}' starts at {}, expected {cur}", e.src)));
        }
        steps.push((out_lists(e, graph.node_count(&e.src)), graph.node_count(&e.dst)));
        cur = &e.dst;
    }
    if cur != node_type {
        return Err(OracleError::BadPath(format!("path ends at {cur}, expected {node_type}")));
    }
    let mut pairs = Vec::new();
    let mut stamps: Vec<Vec<usize>> = steps.iter().map(|(_, m)| vec![usize::MAX; *m]).collect();
    for u in 0..n {
        let mut frontier = vec![u];
        for (i, (lists, _)) in steps.iter().enumerate() {
            let mut next = Vec::new();
            for &x in &frontier {
                for &y in &lists[x] {
                    if stamps[i][y] != u {
                        stamps[i][y] = u;
                        next.push(y);
                    }
                }
            }
            frontier = next;
        }
        pairs.extend(frontier.into_iter().filter(|&v| v != u).map(|v| (u, v)));
    }
    Ok(Adjacency::from_pairs(n, pairs))
}

/// `(h_edge - Σ p_k²) / (1 - Σ p_k²)` with degree-weighted class shares
/// `p_k`. Edges touching unlabeled nodes are ignored.
pub fn adjusted_homophily(adj: &Adjacency, labels: &[Option<usize>]) -> Result<f64, OracleError> {
    let labeled: Vec<(usize, usize)> = adj
        .edges
        .iter()
        .filter_map(|&(u, v)| Some((labels.get(u).copied().flatten()?, labels.get(v).copied().flatten()?)))
        .collect();
    if labeled.is_empty() {
        return Err(OracleError::NoEdges);
    }
    let m = labeled.len() as f64;
    let same = labeled.iter().filter(|(a, b)| a == b).count() as f64;
    let classes = labeled.iter().map(|(a, b)| a.max(b)).max().map_or(0, |k| k + 1);
    let mut degree = vec![0.0; classes];
    for &(a, b) in &labeled {
        degree[a] += 1.0;
        degree[b] += 1.0;
    }
    let sum_sq: f64 = degree.iter().map(|d| (d / (2.0 * m)).powi(2)).sum();
    let denom = 1.0 - sum_sq;
    if denom <= 1e-12 {
        return Err(OracleError::SingleClass);
    }
    Ok((same / m - sum_sq) / denom)
}

/// Label permutations behind [`significant_homophily`].
pub const HOMOPHILY_PERMUTATIONS: usize = 20;
/// Deviations from the permutation mean below this many standard
/// deviations count as no homophily.
pub const HOMOPHILY_Z: f64 = 3.0;

/// [`adjusted_homophily`], or 0 when a seeded label-permutation test cannot
/// tell it from chance. Clique-heavy projections give noisy estimates even
/// for labels independent of the structure; this keeps them at exactly 0.
pub fn significant_homophily(adj: &Adjacency, labels: &[Option<usize>], seed: u64) -> Result<f64, OracleError> {
    let h = adjusted_homophily(adj, labels)?;
    let slots: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_some()).collect();
    let mut pool: Vec<Option<usize>> = slots.iter().map(|&i| labels[i]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut permuted = labels.to_vec();
    let mut null = Vec::with_capacity(HOMOPHILY_PERMUTATIONS);
    for _ in 0..HOMOPHILY_PERMUTATIONS {
        pool.shuffle(&mut rng);
        for (&i, &l) in slots.iter().zip(&pool) {
            permuted[i] = l;
        }
        if let Ok(x) = adjusted_homophily(adj, &permuted) {
            null.push(x);
        }
    }
    if null.len() < 2 {
        return Ok(h);
    }
    let mean = null.iter().sum::<f64>() / null.len() as f64;
    let sd = (null.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (null.len() - 1) as f64).sqrt();
    if sd > 0.0 && (h - mean).abs() < HOMOPHILY_Z * sd {
        return Ok(0.0);
    }
    Ok(h)
}

fn twin(e: &EdgeType) -> String {
    match &e.reverse_of {
        Some(forward) => forward.clone(),
        None => format!("{}{REV_SUFFIX}", e.relation),
    }
}

/// Metapaths that start and end at `target` and read the same backwards:
/// direct target-to-target relations, `[r, r⁻¹]` and `[r1, r2, r2⁻¹, r1⁻¹]`
/// (no immediate backtracking), up to `max_len` relations.
pub fn symmetric_metapaths(graph: &HeteroGraph, target: &str, max_len: usize) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut push = |p: Vec<String>, out: &mut Vec<Vec<String>>| {
        if seen.insert(p.clone()) {
            out.push(p);
        }
    };
    if max_len >= 1 {
        for e in graph.edge_types.iter().filter(|e| e.reverse_of.is_none() && e.src == target && e.dst == target) {
            push(vec![e.relation.clone()], &mut out);
        }
    }
    for r1 in graph.edge_types.iter().filter(|e| e.src == target) {
        if max_len >= 2 {
            push(vec![r1.relation.clone(), twin(r1)], &mut out);
        }
        if max_len >= 4 {
            for r2 in graph.edge_types.iter().filter(|e| e.src == r1.dst && e.relation != twin(r1)) {
                push(vec![r1.relation.clone(), r2.relation.clone(), twin(r2), twin(r1)], &mut out);
            }
        }
    }
    out
}

/// Union of the projections of every symmetric metapath up to `max_len`.
pub fn union_projection(graph: &HeteroGraph, target: &str, max_len: usize) -> Result<Adjacency, OracleError> {
    let n = graph.node_types.get(target).map(|t| t.count).ok_or_else(|| OracleError::UnknownTarget(target.into()))?;
    let mut acc = Adjacency { n, edges: vec![] };
    for p in symmetric_metapaths(graph, target, max_len) {
        acc = acc.union(&metapath_project(graph, target, &p)?);
    }
    Ok(acc)
}
