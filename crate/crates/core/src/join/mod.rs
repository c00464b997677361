//! Column-pair similarity ranking used as a join prior.

mod embed;

use std::collections::HashSet;
use std::fmt::Write;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

pub use embed::{cosine, normalize, Embedder, LineEmbedder, SubprocessEmbedder, TrigramEmbedder, DEFAULT_DIM};

use crate::error::EmbedError;
use crate::ingest::{Database, Profiles};
use crate::schema::{ColumnKey, DataType, DatasetSchema};
use crate::value::Value;

/// Report lines shown to the planner unless configured otherwise.
pub const DEFAULT_TOP_N: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Embedding,
    Overlap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityPair {
    pub a: ColumnKey,
    pub b: ColumnKey,
    pub score: f64,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Ranking {
    pub pairs: Vec<SimilarityPair>,
    pub report: String,
}

/// Column-to-text rendering fed to the embedder.
pub fn serialize_column_for_embedding(key: &ColumnKey, dtype: DataType, samples: &[Value]) -> String {
    let shown: Vec<String> = samples.iter().filter(|v| !v.is_nan()).map(Value::to_string).collect();
    if shown.is_empty() {
        format!("{}.{} {} no samples", key.table, key.column, dtype)
    } else {
        format!("{}.{} {} values: {}", key.table, key.column, dtype, shown.join(", "))
    }
}

fn distinct_keys(values: &[Value]) -> HashSet<String> {
    let mut out = HashSet::new();
    for v in values {
        match v {
            Value::List(items) => out.extend(items.iter().filter_map(Value::join_key)),
            other => out.extend(other.join_key()),
        }
    }
    out
}

/// Containment of the distinct value sets: shared / size of the smaller.
pub fn overlap_score(values_a: &[Value], values_b: &[Value]) -> f64 {
    let (a, b) = (distinct_keys(values_a), distinct_keys(values_b));
    let smaller = a.len().min(b.len());
    if smaller == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / smaller as f64
}

/// Unordered candidate pairs in schema declaration order. Embedding and
/// timestamp columns are skipped, as are pairs already joined by a link
/// and same-table pairs involving that table's primary key.
pub fn candidate_pairs(schema: &DatasetSchema) -> Vec<(ColumnKey, ColumnKey, DataType, DataType)> {
    let mut cols = Vec::new();
    for t in &schema.tables {
        for c in &t.columns {
            if !matches!(c.dtype, DataType::Embedding | DataType::Timestamp) {
                cols.push((t, c));
            }
        }
    }
    let linked = |x: &crate::schema::ColumnDef, table: &str, col: &str| {
        x.link_to.as_ref().is_some_and(|l| l.table == table && l.column == col)
    };
    let mut out = Vec::new();
    for (i, (ta, ca)) in cols.iter().enumerate() {
        for (tb, cb) in &cols[i + 1..] {
            if ta.name == tb.name && (ca.dtype == DataType::PrimaryKey || cb.dtype == DataType::PrimaryKey) {
                continue;
            }
            if linked(ca, &tb.name, &cb.name) || linked(cb, &ta.name, &ca.name) {
                continue;
            }
            out.push((ColumnKey::new(&ta.name, &ca.name), ColumnKey::new(&tb.name, &cb.name), ca.dtype, cb.dtype));
        }
    }
    out
}

fn finish(mut pairs: Vec<SimilarityPair>, top_n: usize) -> Ranking {
    pairs.sort_by(|x, y| {
        y.score.total_cmp(&x.score).then_with(|| (&x.a, &x.b).cmp(&(&y.a, &y.b)))
    });
    pairs.truncate(top_n);
    let report = render_report(&pairs);
    Ranking { pairs, report }
}

/// Embedding-similarity ranking over profile samples.
pub fn rank_by_embedding(
    schema: &DatasetSchema,
    profiles: &Profiles,
    embedder: &mut dyn Embedder,
    top_n: usize,
) -> Result<Ranking, EmbedError> {
    let candidates = candidate_pairs(schema);
    let mut keys: Vec<(ColumnKey, DataType)> = Vec::new();
    for (a, b, da, db) in &candidates {
        for (k, d) in [(a, *da), (b, *db)] {
            if !keys.iter().any(|(x, _)| x == k) {
                keys.push((k.clone(), d));
            }
        }
    }
    let texts: Vec<String> = keys
        .iter()
        .map(|(k, d)| {
            let samples = profiles.get(k).map_or(&[][..], |p| p.samples.as_slice());
            serialize_column_for_embedding(k, *d, samples)
        })
        .collect();
    let vectors = embedder.embed_batch(&texts)?;
    let vec_of = |k: &ColumnKey| &vectors[keys.iter().position(|(x, _)| x == k).expect("embedded")];
    let pairs = candidates
        .into_iter()
        .map(|(a, b, _, _)| {
            let score = cosine(vec_of(&a), vec_of(&b));
            SimilarityPair { a, b, score, method: Method::Embedding }
        })
        .collect();
    Ok(finish(pairs, top_n))
}

/// Value-containment ranking over full payloads. Dummy codes are decoded
/// first so linked columns compare by their display values.
pub fn rank_by_overlap(schema: &DatasetSchema, data: &Database, top_n: usize) -> Ranking {
    let decoded = data.decoded(schema);
    let pairs = candidate_pairs(schema)
        .into_iter()
        .map(|(a, b, _, _)| {
            let va = decoded.column(&a.table, &a.column).unwrap_or(&[]);
            let vb = decoded.column(&b.table, &b.column).unwrap_or(&[]);
            let score = overlap_score(va, vb);
            SimilarityPair { a, b, score, method: Method::Overlap }
        })
        .collect();
    finish(pairs, top_n)
}

/// Ranks with the chosen method, using the built-in trigram embedder.
pub fn rank_pairs(
    schema: &DatasetSchema,
    profiles: &Profiles,
    data: &Database,
    method: Method,
    top_n: usize,
) -> Ranking {
    match method {
        Method::Embedding => rank_by_embedding(schema, profiles, &mut TrigramEmbedder::default(), top_n)
            .expect("built-in embedder is infallible"),
        Method::Overlap => rank_by_overlap(schema, data, top_n),
    }
}

/// English ordinal suffixes: 1st, 2nd, 3rd, 4th, 11th, 21st.
pub fn ordinal(n: usize) -> String {
    let suffix = match (n % 10, n % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}

pub fn render_report(pairs: &[SimilarityPair]) -> String {
    let mut out = String::new();
    for (i, p) in pairs.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        write!(
            out,
            "The pair with the {} highest similarity is column \"{}\" from Table \"{}\" and column \"{}\" from Table \"{}\" with similarity {:.3}",
            ordinal(i + 1),
            p.a.column,
            p.a.table,
            p.b.column,
            p.b.table,
            p.score
        )
        .unwrap();
    }
    out
}

fn line_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r#"^The pair with the \d+(?:st|nd|rd|th) highest similarity is column "([^"]*)" from Table "([^"]*)" and column "([^"]*)" from Table "([^"]*)" with similarity ([0-9.]+)$"#,
        )
        .expect("valid regex")
    })
}

/// Recovers `(a, b, score)` from each report line; unparseable lines are
/// skipped.
pub fn parse_report(report: &str) -> Vec<(ColumnKey, ColumnKey, f64)> {
    report
        .lines()
        .filter_map(|line| {
            let c = line_re().captures(line.trim())?;
            let score = c[5].parse().ok()?;
            Some((ColumnKey::new(&c[2], &c[1]), ColumnKey::new(&c[4], &c[3]), score))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn serialization_template() {
        let k = ColumnKey::new("Journal", "Name");
        let s = ["Nature", "Science", "NeurIPS", "ICML", "CVPR"].map(Value::from);
        assert_eq!(
            serialize_column_for_embedding(&k, DataType::Category, &s),
            "Journal.Name category values: Nature, Science, NeurIPS, ICML, CVPR"
        );
        assert!(serialize_column_for_embedding(&k, DataType::Text, &[]).contains("no samples"));
    }

    #[test]
    fn overlap_examples() {
        let ints = |xs: &[i64]| xs.iter().copied().map(Value::Int).collect::<Vec<_>>();
        assert!((overlap_score(&ints(&[1, 2, 3]), &ints(&[2, 3, 4])) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(overlap_score(&ints(&[1, 2]), &ints(&[0, 1, 2, 3])), 1.0);
        assert_eq!(overlap_score(&ints(&[1, 2]), &ints(&[10, 11])), 0.0);
        assert_eq!(overlap_score(&[], &ints(&[1])), 0.0);
    }

    #[test]
    fn ordinals() {
        let got: Vec<String> = [1, 2, 3, 4, 11, 12, 13, 21, 22, 101].iter().map(|&n| ordinal(n)).collect();
        assert_eq!(got, ["1st", "2nd", "3rd", "4th", "11th", "12th", "13th", "21st", "22nd", "101st"]);
    }

    #[test]
    fn empty_report_for_zero_lines() {
        assert_eq!(render_report(&[]), "");
    }

    proptest! {
        #[test]
        fn overlap_symmetric(a in proptest::collection::vec(0i64..15, 0..20), b in proptest::collection::vec(0i64..15, 0..20)) {
            let va: Vec<Value> = a.into_iter().map(Value::Int).collect();
            let vb: Vec<Value> = b.into_iter().map(Value::Int).collect();
            let s = overlap_score(&va, &vb);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(s, overlap_score(&vb, &va));
            if !va.is_empty() {
                prop_assert_eq!(overlap_score(&va, &va), 1.0);
            }
        }

        #[test]
        fn report_round_trips(scores in proptest::collection::vec(0.0f64..=1.0, 0..30)) {
            let pairs: Vec<SimilarityPair> = scores.iter().enumerate().map(|(i, &s)| SimilarityPair {
                a: ColumnKey::new(format!("T{i}"), "col_a"),
                b: ColumnKey::new("U", format!("c{i}")),
                score: s,
                method: Method::Overlap,
            }).collect();
            let parsed = parse_report(&render_report(&pairs));
            prop_assert_eq!(parsed.len(), pairs.len());
            for (p, (a, b, s)) in pairs.iter().zip(parsed) {
                prop_assert_eq!(&p.a, &a);
                prop_assert_eq!(&p.b, &b);
                prop_assert!((p.score - s).abs() <= 0.0005 + 1e-12);
            }
        }
    }
}
