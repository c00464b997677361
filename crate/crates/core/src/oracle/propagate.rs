use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Metric, Task};
use crate::error::OracleError;
use crate::graph::HeteroGraph;
use crate::value::Value;

/// Iterations granted at full budget.
pub const MAX_ITERS: usize = 50;

/// Negatives ranked against each held-out positive link.
pub const MRR_NEGATIVES: usize = 100;

/// Class ids of the label column (sorted distinct values) and the values.
pub fn class_labels(graph: &HeteroGraph, task: &Task) -> Result<(Vec<Option<usize>>, Vec<Value>), OracleError> {
    let node =
        graph.node_types.get(&task.target_type).ok_or_else(|| OracleError::UnknownTarget(task.target_type.clone()))?;
    let col = node.features.get(&task.label_column).ok_or_else(|| OracleError::UnknownLabel {
        target: task.target_type.clone(),
        column: task.label_column.clone(),
    })?;
    let classes: BTreeMap<String, Value> =
        col.iter().filter_map(|v| v.join_key().map(|k| (k, v.clone()))).collect();
    let ids: HashMap<&String, usize> = classes.keys().enumerate().map(|(i, k)| (k, i)).collect();
    let labels = col.iter().map(|v| v.join_key().map(|k| ids[&k])).collect();
    Ok((labels, classes.into_values().collect()))
}

/// Seeded split of the labeled nodes into (train, validation).
pub fn split_nodes(labels: &[Option<usize>], task: &Task) -> (Vec<usize>, Vec<usize>) {
    let mut nodes: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_some()).collect();
    nodes.shuffle(&mut ChaCha8Rng::seed_from_u64(task.split.seed));
    let n_train = (task.split.train * nodes.len() as f64).round() as usize;
    let n_val = (task.split.val * nodes.len() as f64).round() as usize;
    let train = nodes[..n_train.min(nodes.len())].to_vec();
    let val = nodes[n_train.min(nodes.len())..(n_train + n_val).min(nodes.len())].to_vec();
    (train, val)
}

/// Undirected relational graph over all nodes, addressed by global ids,
/// plus the global offset of each node type.
fn global_graph(graph: &HeteroGraph) -> (Vec<Vec<usize>>, HashMap<&str, usize>) {
    let mut offsets = HashMap::new();
    let mut total = 0;
    for (name, t) in &graph.node_types {
        offsets.insert(name.as_str(), total);
        total += t.count;
    }
    let mut adj = vec![Vec::new(); total];
    for e in graph.edge_types.iter().filter(|e| e.reverse_of.is_none()) {
        let (os, od) = (offsets[e.src.as_str()], offsets[e.dst.as_str()]);
        for (&s, &d) in e.src_index.iter().zip(&e.dst_index) {
            adj[os + s].push(od + d);
            adj[od + d].push(os + s);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    (adj, offsets)
}

/// Target-type neighbors of each target node within `2 * hops` steps of
/// the relational graph.
pub fn homogenize(graph: &HeteroGraph, target: &str, hops: usize) -> Result<Vec<Vec<usize>>, OracleError> {
    let n = graph.node_types.get(target).map(|t| t.count).ok_or_else(|| OracleError::UnknownTarget(target.into()))?;
    let (adj, offsets) = global_graph(graph);
    let base = offsets[target];
    let depth = 2 * hops;
    let mut seen = vec![usize::MAX; adj.len()];
    let mut out = Vec::with_capacity(n);
    for u in 0..n {
        let start = base + u;
        seen[start] = u;
        let mut frontier = vec![start];
        let mut found = Vec::new();
        for _ in 0..depth {
            let mut next = Vec::new();
            for &x in &frontier {
                for &y in &adj[x] {
                    if seen[y] != u {
                        seen[y] = u;
                        next.push(y);
                        if (base..base + n).contains(&y) {
                            found.push(y - base);
                        }
                    }
                }
            }
            frontier = next;
        }
        found.sort_unstable();
        out.push(found);
    }
    Ok(out)
}

fn majority(train: &[usize], labels: &[Option<usize>], classes: usize) -> Vec<usize> {
    let mut counts = vec![0usize; classes];
    for &u in train {
        counts[labels[u].expect("train nodes are labeled")] += 1;
    }
    counts
}

/// Highest vote; ties go to the class more frequent in training, then to
/// the smaller class id.
fn argmax(votes: &[usize], prior: &[usize]) -> Option<usize> {
    (0..votes.len()).filter(|&k| votes[k] > 0).max_by(|&a, &b| {
        votes[a].cmp(&votes[b]).then(prior[a].cmp(&prior[b])).then(b.cmp(&a))
    })
}

/// Mann-Whitney AUC; ties count one half.
pub fn auc(positive: &[f64], negative: &[f64]) -> Result<f64, OracleError> {
    if positive.is_empty() || negative.is_empty() {
        return Err(OracleError::MetricUndefined("AUC needs both classes".into()));
    }
    let mut wins = 0.0;
    for p in positive {
        for n in negative {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    Ok(wins / (positive.len() * negative.len()) as f64)
}

/// Majority-vote label propagation from the training labels; returns the
/// task metric on the validation split. Runs `ceil(budget * MAX_ITERS)`
/// synchronous rounds at most.
pub fn label_prop_score(graph: &HeteroGraph, task: &Task, hops: usize, budget: f64) -> Result<f64, OracleError> {
    let (labels, classes) = class_labels(graph, task)?;
    let (train, val) = split_nodes(&labels, task);
    if train.is_empty() {
        return Err(OracleError::NoTrain);
    }
    let k = classes.len();
    let prior = majority(&train, &labels, k);
    let fallback = argmax(&prior, &prior).expect("non-empty training set");
    let neighbors = homogenize(graph, &task.target_type, hops.max(1))?;
    let is_train: HashSet<usize> = train.iter().copied().collect();

    let mut current: Vec<Option<usize>> = vec![None; labels.len()];
    for &u in &train {
        current[u] = labels[u];
    }
    let votes_of = |u: usize, current: &[Option<usize>]| {
        let mut votes = vec![0usize; k];
        for &v in &neighbors[u] {
            if let Some(c) = current[v] {
                votes[c] += 1;
            }
        }
        votes
    };
    let cap = ((budget * MAX_ITERS as f64).ceil() as usize).max(1);
    for _ in 0..cap {
        let mut next = current.clone();
        let mut changed = false;
        for u in (0..labels.len()).filter(|u| !is_train.contains(u)) {
            let best = argmax(&votes_of(u, &current), &prior);
            if best.is_some() && best != current[u] {
                next[u] = best;
                changed = true;
            }
        }
        current = next;
        if !changed {
            break;
        }
    }

    match task.metric {
        Metric::Accuracy => {
            if val.is_empty() {
                return Err(OracleError::MetricUndefined("empty validation split".into()));
            }
            let hits = val.iter().filter(|&&u| current[u].unwrap_or(fallback) == labels[u].expect("labeled")).count();
            Ok(hits as f64 / val.len() as f64)
        }
        Metric::Auc => {
            if k != 2 {
                return Err(OracleError::MetricUndefined(format!("AUC needs a binary label, found {k} classes")));
            }
            let base_rate = prior[1] as f64 / train.len() as f64;
            let (mut pos, mut neg) = (Vec::new(), Vec::new());
            for &u in &val {
                let votes = votes_of(u, &current);
                let total = votes[0] + votes[1];
                let s = if total == 0 { base_rate } else { votes[1] as f64 / total as f64 };
                if labels[u] == Some(1) {
                    pos.push(s);
                } else {
                    neg.push(s);
                }
            }
            auc(&pos, &neg)
        }
        Metric::Mrr => Err(OracleError::MetricUndefined("MRR applies to link prediction".into())),
    }
}

fn walk_counts(adj: &[Vec<usize>], start: usize) -> (HashMap<usize, f64>, HashMap<usize, f64>) {
    let mut w1: HashMap<usize, f64> = HashMap::new();
    for &a in &adj[start] {
        *w1.entry(a).or_default() += 1.0;
    }
    let mut w2: HashMap<usize, f64> = HashMap::new();
    for (&a, &c) in &w1 {
        for &b in &adj[a] {
            *w2.entry(b).or_default() += c;
        }
    }
    let mut w3: HashMap<usize, f64> = HashMap::new();
    for (&b, &c) in &w2 {
        for &x in &adj[b] {
            *w3.entry(x).or_default() += c;
        }
    }
    (w2, w3)
}

/// Link-prediction proxy for relation `task.target_type`: a seeded share of
/// its edges is held out and each positive is ranked against
/// [`MRR_NEGATIVES`] random destinations by the count of 2- and 3-step
/// walks in the remaining graph.
pub fn link_heuristic_score(graph: &HeteroGraph, task: &Task) -> Result<f64, OracleError> {
    let rel = graph.relation(&task.target_type).ok_or_else(|| OracleError::UnknownTarget(task.target_type.clone()))?;
    let forward = rel.reverse_of.clone().unwrap_or_else(|| rel.relation.clone());
    let rel = graph.relation(&forward).ok_or_else(|| OracleError::UnknownTarget(forward.clone()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(task.split.seed);
    let mut order: Vec<usize> = (0..rel.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((task.split.val * rel.len() as f64).round() as usize).max(1).min(rel.len());
    let held: HashSet<usize> = order[..n_val].iter().copied().collect();
    if held.is_empty() {
        return Err(OracleError::MetricUndefined("relation has no edges".into()));
    }

    let mut reduced = graph.clone();
    for e in reduced.edge_types.iter_mut().filter(|e| e.relation == forward) {
        let keep: Vec<usize> = (0..e.len()).filter(|i| !held.contains(i)).collect();
        e.src_index = keep.iter().map(|&i| e.src_index[i]).collect();
        e.dst_index = keep.iter().map(|&i| e.dst_index[i]).collect();
    }
    let (adj, offsets) = global_graph(&reduced);
    let (os, od) = (offsets[rel.src.as_str()], offsets[rel.dst.as_str()]);
    let n_dst = graph.node_count(&rel.dst);

    let mut positives = Vec::new();
    let mut negatives_all = Vec::new();
    let mut reciprocal = 0.0;
    let mut held_sorted: Vec<usize> = held.into_iter().collect();
    held_sorted.sort_unstable();
    for &i in &held_sorted {
        let (s, d) = (rel.src_index[i], rel.dst_index[i]);
        let (w2, w3) = walk_counts(&adj, os + s);
        let score = |x: usize| w2.get(&(od + x)).copied().unwrap_or(0.0) + w3.get(&(od + x)).copied().unwrap_or(0.0);
        let pos = score(d);
        let negs: Vec<f64> = (0..MRR_NEGATIVES).map(|_| score(rng.gen_range(0..n_dst))).collect();
        let greater = negs.iter().filter(|&&x| x > pos).count() as f64;
        let ties = negs.iter().filter(|&&x| x == pos).count() as f64;
        reciprocal += 1.0 / (1.0 + greater + ties / 2.0);
        positives.push(pos);
        negatives_all.extend(negs);
    }
    match task.metric {
        Metric::Mrr => Ok(reciprocal / held_sorted.len() as f64),
        Metric::Auc => auc(&positives, &negatives_all),
        Metric::Accuracy => Err(OracleError::MetricUndefined("accuracy applies to classification".into())),
    }
}
