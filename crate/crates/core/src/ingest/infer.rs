use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::load::parse_timestamp;
use super::profile::{ColumnProfile, Profiles, ValueKind};
use crate::schema::{ColumnKey, DataType};
use crate::value::Value;

/// A deterministic type guess for one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeGuess {
    pub dtype: DataType,
    pub confidence: f64,
    pub description: String,
}

fn guess(dtype: DataType, confidence: f64, description: String) -> TypeGuess {
    TypeGuess { dtype, confidence, description }
}

fn id_like(name: &str) -> bool {
    let lower = name.to_ascii_lowercase();
    lower == "id" || lower.ends_with("id") || lower.ends_with("_key")
}

fn word_count(v: &Value) -> usize {
    v.as_str().map_or(0, |s| s.split_whitespace().count())
}

/// Rule-based type inference from a column profile. Never yields
/// `foreign_key`: links come from schemas and actions only.
pub fn infer_column_type(name: &str, p: &ColumnProfile) -> TypeGuess {
    let present = p.total - p.nan_count;
    if p.is_multidimensional {
        return guess(
            DataType::Embedding,
            0.95,
            format!("Column {name} holds fixed-width numeric vectors, probably an embedding."),
        );
    }
    match p.kind {
        ValueKind::List => {
            let elems = p.expanded_uniques.unwrap_or(0);
            guess(
                DataType::MultiCategory,
                0.9,
                format!("Column {name} holds lists of values with {elems} distinct elements, so it is multi-category."),
            )
        }
        ValueKind::Empty => guess(DataType::Category, 0.1, format!("Column {name} has no values.")),
        ValueKind::Int => {
            let (min, max) = (p.min.as_ref().and_then(Value::as_i64), p.max.as_ref().and_then(Value::as_i64));
            if let (Some(lo), Some(hi)) = (min, max) {
                let dense = (hi - lo + 1) as i128 <= 2 * p.total as i128;
                if p.nan_count == 0 && p.uniques == p.total && p.total > 0 && dense {
                    return guess(
                        DataType::PrimaryKey,
                        0.9,
                        format!(
                            "Column {name} is probably representing the ID from {lo} to {hi} of the rows, as every value is unique."
                        ),
                    );
                }
            }
            let small = p.uniques <= 20.max(present / 20);
            if small || id_like(name) {
                guess(
                    DataType::Category,
                    if small { 0.75 } else { 0.6 },
                    format!("Column {name} takes {} distinct integer values, so it is probably categorical.", p.uniques),
                )
            } else {
                guess(DataType::Numeric, 0.6, format!("Column {name} holds integer measurements with many distinct values."))
            }
        }
        ValueKind::Float => guess(DataType::Numeric, 0.8, format!("Column {name} holds real-valued measurements.")),
        ValueKind::Str => {
            let observed: Vec<&Value> = p.samples.iter().chain(p.mode.iter()).filter(|v| !v.is_nan()).collect();
            let all_times = !observed.is_empty()
                && observed.iter().all(|v| v.as_str().is_some_and(|s| parse_timestamp(s).is_some()));
            if all_times {
                return guess(DataType::Timestamp, 0.85, format!("Column {name} holds full datetime values."));
            }
            let avg_words = if observed.is_empty() {
                0.0
            } else {
                observed.iter().map(|v| word_count(v)).sum::<usize>() as f64 / observed.len() as f64
            };
            let ratio = if present == 0 { 0.0 } else { p.uniques as f64 / present as f64 };
            if (ratio >= 0.5 && avg_words >= 3.0) || avg_words >= 6.0 {
                guess(
                    DataType::Text,
                    0.75,
                    format!("Column {name} holds natural-language text with {} distinct values.", p.uniques),
                )
            } else {
                guess(
                    DataType::Category,
                    0.7,
                    format!("Column {name} takes {} distinct string values, so it is probably categorical.", p.uniques),
                )
            }
        }
        ValueKind::Vector | ValueKind::Mixed => {
            guess(DataType::Category, 0.3, format!("Column {name} mixes value kinds; treated as categorical."))
        }
    }
}

/// Infers a type for every profiled column.
pub fn infer_types(profiles: &Profiles) -> BTreeMap<ColumnKey, TypeGuess> {
    profiles.iter().map(|(k, p)| (k.clone(), infer_column_type(&k.column, p))).collect()
}
