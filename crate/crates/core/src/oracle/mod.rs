//! Cheap proxy oracles for candidate graphs and ranking comparison.
//!
//! Every scorer is a pure function of `(graph, task, budget)`; the seed
//! lives in the task split.

mod external;
mod homophily;
mod propagate;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use external::{call_external, OracleRequest};
pub use homophily::{
    adjusted_homophily, metapath_project, significant_homophily, symmetric_metapaths, union_projection, Adjacency,
    HOMOPHILY_PERMUTATIONS, HOMOPHILY_Z,
};
pub use propagate::{
    auc, class_labels, homogenize, label_prop_score, link_heuristic_score, split_nodes, MAX_ITERS, MRR_NEGATIVES,
};

use crate::error::OracleError;
use crate::graph::{export_graph, HeteroGraph};

/// Early-stage budget: a tenth of the full iteration count.
pub const DEFAULT_BUDGET: f64 = 0.1;

/// Longest symmetric metapath the homophily scorer considers.
pub const DEFAULT_METAPATH_LEN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Classification,
    LinkPrediction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    Auc,
    Mrr,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Auc => "auc",
            Metric::Mrr => "mrr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: f64,
    pub val: f64,
    pub seed: u64,
}

impl Default for Split {
    fn default() -> Self {
        Self { train: 0.6, val: 0.2, seed: 0 }
    }
}

/// A downstream objective. For link prediction `target_type` names a
/// relation and `label_column` is unused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub name: String,
    pub target_type: String,
    #[serde(default)]
    pub label_column: String,
    pub objective: Objective,
    #[serde(default)]
    pub split: Split,
    pub metric: Metric,
}

impl Task {
    pub fn classification(target: &str, label: &str, metric: Metric) -> Self {
        Self {
            name: format!("{target}.{label}"),
            target_type: target.into(),
            label_column: label.into(),
            objective: Objective::Classification,
            split: Split::default(),
            metric,
        }
    }

    pub fn link_prediction(relation: &str) -> Self {
        Self {
            name: relation.into(),
            target_type: relation.into(),
            label_column: String::new(),
            objective: Objective::LinkPrediction,
            split: Split::default(),
            metric: Metric::Mrr,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.split.seed = seed;
        self
    }

    pub fn check(&self, graph: &HeteroGraph) -> Result<(), OracleError> {
        let Split { train, val, .. } = self.split;
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !unit(train) || !unit(val) || train + val >= 1.0 {
            return Err(OracleError::InvalidTask(format!("split fractions {train}/{val}")));
        }
        match self.objective {
            Objective::Classification => {
                if self.metric == Metric::Mrr {
                    return Err(OracleError::InvalidTask("mrr needs a link-prediction task".into()));
                }
                let node = graph
                    .node_types
                    .get(&self.target_type)
                    .ok_or_else(|| OracleError::UnknownTarget(self.target_type.clone()))?;
                if !node.features.contains_key(&self.label_column) {
                    return Err(OracleError::UnknownLabel {
                        target: self.target_type.clone(),
                        column: self.label_column.clone(),
                    });
                }
            }
            Objective::LinkPrediction => {
                if self.metric == Metric::Accuracy {
                    return Err(OracleError::InvalidTask("accuracy needs a classification task".into()));
                }
                graph.relation(&self.target_type).ok_or_else(|| OracleError::UnknownTarget(self.target_type.clone()))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScorerConfig {
    LabelProp { hops: usize },
    /// Adjusted homophily of the train labels over all symmetric metapaths,
    /// rescaled from [-1, 1] to [0, 1].
    Homophily { max_len: usize },
    LinkHeuristic,
    External { command: String, #[serde(default)] args: Vec<String> },
}

impl ScorerConfig {
    pub fn name(&self) -> String {
        match self {
            ScorerConfig::LabelProp { hops } => format!("label_prop_{hops}hop"),
            ScorerConfig::Homophily { .. } => "homophily".into(),
            ScorerConfig::LinkHeuristic => "link_heuristic".into(),
            ScorerConfig::External { command, args } => {
                let mut name = format!("external:{command}");
                for a in args {
                    name.push(' ');
                    name.push_str(a);
                }
                name
            }
        }
    }
}

pub fn default_basket(task: &Task) -> Vec<ScorerConfig> {
    match task.objective {
        Objective::Classification => vec![
            ScorerConfig::LabelProp { hops: 1 },
            ScorerConfig::LabelProp { hops: 2 },
            ScorerConfig::Homophily { max_len: DEFAULT_METAPATH_LEN },
        ],
        Objective::LinkPrediction => vec![ScorerConfig::LinkHeuristic],
    }
}

fn homophily_score(graph: &HeteroGraph, task: &Task, max_len: usize) -> Result<f64, OracleError> {
    let (labels, _) = class_labels(graph, task)?;
    let (train, _) = split_nodes(&labels, task);
    let mut visible = vec![None; labels.len()];
    for u in train {
        visible[u] = labels[u];
    }
    let adj = union_projection(graph, &task.target_type, max_len)?;
    match significant_homophily(&adj, &visible, task.split.seed) {
        Ok(h) => Ok(((h + 1.0) / 2.0).clamp(0.0, 1.0)),
        // No relation to diagnose: neither helpful nor harmful.
        Err(OracleError::NoEdges) => Ok(0.5),
        Err(e) => Err(e),
    }
}

/// Runs one scorer. `budget` is the fraction of the full iteration count.
pub fn run_scorer(graph: &HeteroGraph, task: &Task, scorer: &ScorerConfig, budget: f64) -> Result<f64, OracleError> {
    match scorer {
        ScorerConfig::LabelProp { hops } => label_prop_score(graph, task, *hops, budget),
        ScorerConfig::Homophily { max_len } => homophily_score(graph, task, *max_len),
        ScorerConfig::LinkHeuristic => link_heuristic_score(graph, task),
        ScorerConfig::External { command, args } => {
            let dir = tempfile::tempdir().map_err(|e| OracleError::External(format!("staging dir: {e}")))?;
            export_graph(graph, dir.path()).map_err(|e| OracleError::External(format!("export: {e}")))?;
            call_external(command, args, dir.path(), task, budget)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub candidate_id: String,
    pub per_scorer: IndexMap<String, f64>,
    /// Scorers that failed, with their error text.
    pub failures: IndexMap<String, String>,
    /// Mean of the surviving scorers; 0 when none survived.
    pub aggregate: f64,
    pub budget_used: f64,
    /// Some scorer failed.
    pub degraded: bool,
    pub action_count: usize,
}

/// A candidate graph awaiting a score.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub id: String,
    pub graph: HeteroGraph,
    pub action_count: usize,
}

pub fn score_candidate(
    candidate: &Candidate,
    task: &Task,
    basket: &[ScorerConfig],
    budget: f64,
) -> Result<OracleReport, OracleError> {
    if basket.is_empty() {
        return Err(OracleError::EmptyBasket);
    }
    let mut per_scorer = IndexMap::new();
    let mut failures = IndexMap::new();
    let checked = task.check(&candidate.graph);
    for scorer in basket {
        let outcome = checked.clone().and_then(|_| run_scorer(&candidate.graph, task, scorer, budget));
        match outcome {
            Ok(s) => {
                per_scorer.insert(scorer.name(), s);
            }
            Err(e) => {
                failures.insert(scorer.name(), e.to_string());
            }
        }
    }
    let aggregate =
        if per_scorer.is_empty() { 0.0 } else { per_scorer.values().sum::<f64>() / per_scorer.len() as f64 };
    Ok(OracleReport {
        candidate_id: candidate.id.clone(),
        degraded: !failures.is_empty(),
        per_scorer,
        failures,
        aggregate,
        budget_used: budget,
        action_count: candidate.action_count,
    })
}

/// Scores candidates concurrently; reports come back in input order.
pub fn score_candidates(
    candidates: &[Candidate],
    task: &Task,
    basket: &[ScorerConfig],
    budget: f64,
) -> Result<Vec<OracleReport>, OracleError> {
    if basket.is_empty() {
        return Err(OracleError::EmptyBasket);
    }
    std::thread::scope(|s| {
        let handles: Vec<_> =
            candidates.iter().map(|c| s.spawn(move || score_candidate(c, task, basket, budget))).collect();
        handles.into_iter().map(|h| h.join().expect("scorer thread panicked")).collect()
    })
}

fn report_order(a: &OracleReport, b: &OracleReport) -> Ordering {
    b.aggregate
        .total_cmp(&a.aggregate)
        .then(a.action_count.cmp(&b.action_count))
        .then(a.candidate_id.cmp(&b.candidate_id))
}

/// Best first: higher aggregate, then fewer actions, then id.
pub fn rank_candidates(reports: &[OracleReport]) -> Vec<String> {
    let mut sorted: Vec<&OracleReport> = reports.iter().collect();
    sorted.sort_by(|a, b| report_order(a, b));
    sorted.into_iter().map(|r| r.candidate_id.clone()).collect()
}

/// Share of discordant pairs between two rankings of the same ids.
pub fn kendall_tau_distance<S: AsRef<str>>(a: &[S], b: &[S]) -> Result<f64, OracleError> {
    let pos: HashMap<&str, usize> = b.iter().enumerate().map(|(i, s)| (s.as_ref(), i)).collect();
    let ids_a: HashSet<&str> = a.iter().map(AsRef::as_ref).collect();
    if a.len() != b.len() || pos.len() != b.len() || ids_a.len() != a.len() || ids_a.iter().any(|s| !pos.contains_key(s)) {
        return Err(OracleError::MismatchedIds);
    }
    let n = a.len();
    if n < 2 {
        return Err(OracleError::MetricUndefined("Kendall distance needs two or more items".into()));
    }
    let in_b: Vec<usize> = a.iter().map(|s| pos[s.as_ref()]).collect();
    let mut discordant = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            if in_b[i] > in_b[j] {
                discordant += 1;
            }
        }
    }
    Ok(discordant as f64 / (n * (n - 1) / 2) as f64)
}

/// Node-induced subgraph keeping each node with probability `ratio`.
pub fn sample_subgraph(graph: &HeteroGraph, ratio: f64, seed: u64) -> HeteroGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remap: BTreeMap<&str, Vec<Option<usize>>> = BTreeMap::new();
    let mut out = HeteroGraph::default();
    for (name, node) in &graph.node_types {
        let keep: Vec<bool> = (0..node.count).map(|_| rng.gen_bool(ratio.clamp(0.0, 1.0))).collect();
        let mut next = 0;
        let map: Vec<Option<usize>> = keep
            .iter()
            .map(|&k| {
                k.then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect();
        let pick = |col: &Vec<crate::value::Value>| -> Vec<crate::value::Value> {
            col.iter().zip(&keep).filter(|(_, &k)| k).map(|(v, _)| v.clone()).collect()
        };
        let mut sub = node.clone();
        sub.count = next;
        sub.features = node.features.iter().map(|(k, v)| (k.clone(), pick(v))).collect();
        sub.timestamps = node.timestamps.as_ref().map(pick);
        out.node_types.insert(name.clone(), sub);
        remap.insert(name.as_str(), map);
    }
    for e in &graph.edge_types {
        let (ms, md) = (&remap[e.src.as_str()], &remap[e.dst.as_str()]);
        let kept: Vec<(usize, usize, usize)> = (0..e.len())
            .filter_map(|i| Some((i, ms[e.src_index[i]]?, md[e.dst_index[i]]?)))
            .collect();
        let mut sub = e.clone();
        sub.src_index = kept.iter().map(|k| k.1).collect();
        sub.dst_index = kept.iter().map(|k| k.2).collect();
        sub.features = e.features.iter().map(|(k, v)| (k.clone(), kept.iter().map(|t| v[t.0].clone()).collect())).collect();
        sub.timestamps = e.timestamps.as_ref().map(|ts| kept.iter().map(|t| ts[t.0].clone()).collect());
        out.edge_types.push(sub);
    }
    out
}
