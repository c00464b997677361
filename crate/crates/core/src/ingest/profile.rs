use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Database;
use crate::schema::{ColumnKey, DatasetSchema};
use crate::value::Value;

/// Number of sampled values per column in stats reports.
pub const DEFAULT_SAMPLE_SIZE: usize = 5;

/// The physical kind shared by the non-null cells of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Empty,
    Int,
    /// Floats, possibly mixed with integers.
    Float,
    Str,
    List,
    Vector,
    Mixed,
}

impl ValueKind {
    fn of(v: &Value) -> Option<ValueKind> {
        Some(match v {
            Value::Null => return None,
            Value::Float(f) if f.is_nan() => return None,
            Value::Int(_) => ValueKind::Int,
            Value::Float(_) => ValueKind::Float,
            Value::Str(_) => ValueKind::Str,
            Value::List(_) => ValueKind::List,
            Value::Vector(_) => ValueKind::Vector,
        })
    }

    fn merge(self, other: ValueKind) -> ValueKind {
        use ValueKind::*;
        match (self, other) {
            (Empty, k) | (k, Empty) => k,
            (a, b) if a == b => a,
            (Int, Float) | (Float, Int) => Float,
            _ => Mixed,
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, ValueKind::Int | ValueKind::Float)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnProfile {
    pub total: usize,
    /// Distinct non-NaN cells.
    pub uniques: usize,
    pub nan_count: usize,
    /// Most frequent value (flattened elements for list columns).
    pub mode: Option<Value>,
    pub min: Option<Value>,
    pub max: Option<Value>,
    pub samples: Vec<Value>,
    pub is_multidimensional: bool,
    /// Distinct elements after flattening, for list columns.
    pub expanded_uniques: Option<usize>,
    pub kind: ValueKind,
}

/// Profiles keyed by column.
pub type Profiles = BTreeMap<ColumnKey, ColumnProfile>;

fn mode_of<'a>(values: impl Iterator<Item = &'a Value>) -> Option<Value> {
    let mut counts: HashMap<&Value, (usize, usize)> = HashMap::new();
    for (i, v) in values.enumerate() {
        counts.entry(v).or_insert((0, i)).0 += 1;
    }
    counts
        .into_iter()
        .max_by(|(_, (ca, ia)), (_, (cb, ib))| ca.cmp(cb).then(ib.cmp(ia)))
        .map(|(v, _)| v.clone())
}

/// Computes the statistics of one column. Sampling is seeded uniform
/// without replacement; NaNs count toward `total` and `nan_count` only.
pub fn profile_column(values: &[Value], k: usize, seed: u64) -> ColumnProfile {
    let total = values.len();
    let present: Vec<&Value> = values.iter().filter(|v| !v.is_nan()).collect();
    let nan_count = total - present.len();
    let kind = present.iter().filter_map(|v| ValueKind::of(v)).fold(ValueKind::Empty, ValueKind::merge);

    let uniques = present.iter().copied().collect::<HashSet<_>>().len();
    let (mode, expanded_uniques) = if kind == ValueKind::List {
        let flat = present.iter().flat_map(|v| match v {
            Value::List(items) => items.as_slice(),
            _ => &[],
        });
        let flat: Vec<&Value> = flat.filter(|v| !v.is_nan()).collect();
        (mode_of(flat.iter().copied()), Some(flat.iter().copied().collect::<HashSet<_>>().len()))
    } else {
        (mode_of(present.iter().copied()), None)
    };
    let (min, max) = if kind.is_numeric() {
        (present.iter().copied().min().cloned(), present.iter().copied().max().cloned())
    } else {
        (None, None)
    };

    let take = k.min(total);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = sample(&mut rng, total, take).into_iter().map(|i| values[i].clone()).collect();

    ColumnProfile {
        total,
        uniques,
        nan_count,
        mode,
        min,
        max,
        samples,
        is_multidimensional: kind == ValueKind::Vector,
        expanded_uniques,
        kind,
    }
}

/// Profiles every loaded column of the schema.
pub fn profile_database(schema: &DatasetSchema, data: &Database, k: usize, seed: u64) -> Profiles {
    data.columns_of(schema)
        .map(|(t, c, _, values)| (ColumnKey::new(t, c), profile_column(values, k, seed)))
        .collect()
}
