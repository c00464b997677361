use std::collections::BTreeMap;

use tracing::warn;

use super::client::{CallOptions, ChatClient, Message, Phase};
use super::prompt::INFER_TYPES_PROMPT;
use super::selection::parse_lenient;
use crate::ingest::{infer_types, Profiles, TypeGuess};
use crate::schema::{ColumnKey, DataType};

#[derive(Debug, Clone, PartialEq)]
pub struct InferOutcome {
    pub types: BTreeMap<ColumnKey, TypeGuess>,
    /// Columns typed by the deterministic rules instead of the model.
    pub fallback: Vec<ColumnKey>,
    /// The model could not be reached at all.
    pub transport_failed: bool,
}

/// Confidence attached to model-provided types.
const MODEL_CONFIDENCE: f64 = 0.8;

fn model_dtype(name: &str, multidimensional: bool) -> Option<DataType> {
    let dtype = match name.trim().to_ascii_lowercase().as_str() {
        "float" if multidimensional => DataType::Embedding,
        "float" | "numeric" => DataType::Numeric,
        "category" | "categorical" => DataType::Category,
        "datetime" | "timestamp" => DataType::Timestamp,
        "text" => DataType::Text,
        "multi_category" => DataType::MultiCategory,
        "embedding" => DataType::Embedding,
        "primary_key" => DataType::PrimaryKey,
        _ => return None,
    };
    Some(dtype)
}

/// Reads `{table: {column: (dtype, description)}}`; entries that do not fit
/// the shape are skipped.
pub fn parse_type_response(text: &str) -> Option<BTreeMap<ColumnKey, (String, String)>> {
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    let value = parse_lenient(text.get(start..=end)?)?;
    let mut out = BTreeMap::new();
    for (table, cols) in value.as_object()? {
        let Some(cols) = cols.as_object() else { continue };
        for (col, entry) in cols {
            let Some(pair) = entry.as_array() else { continue };
            let Some(dtype) = pair.first().and_then(|d| d.as_str()) else { continue };
            let desc = pair.get(1).and_then(|d| d.as_str()).unwrap_or_default();
            out.insert(ColumnKey::new(table, col), (dtype.to_string(), desc.to_string()));
        }
    }
    Some(out)
}

/// Model-assisted type inference with per-column fallback to the rules.
/// `foreign_key` answers are never trusted; links come from actions.
pub fn infer_types_llm(
    client: &dyn ChatClient,
    stats_report: &str,
    profiles: &Profiles,
    seed: u64,
) -> InferOutcome {
    let rules = infer_types(profiles);
    let prompt = format!("{INFER_TYPES_PROMPT}\n{stats_report}");
    let opts = CallOptions { seed, temperature: 0.0, turn: 0, phase: Phase::Inference };
    let response = match client.complete(&[Message::user(prompt)], &opts) {
        Ok(r) => r,
        Err(e) => {
            warn!("type inference request failed, using rules: {e}");
            return InferOutcome { fallback: rules.keys().cloned().collect(), types: rules, transport_failed: true };
        }
    };
    let parsed = parse_type_response(&response).unwrap_or_else(|| {
        warn!("type inference response unparseable, using rules");
        BTreeMap::new()
    });
    let mut types = BTreeMap::new();
    let mut fallback = Vec::new();
    for (key, rule) in rules {
        let multidim = profiles.get(&key).is_some_and(|p| p.is_multidimensional);
        let model = parsed.get(&key).and_then(|(d, desc)| Some((model_dtype(d, multidim)?, desc)));
        match model {
            Some((dtype, desc)) => {
                types.insert(key, TypeGuess { dtype, confidence: MODEL_CONFIDENCE, description: desc.clone() });
            }
            None => {
                fallback.push(key.clone());
                types.insert(key, rule);
            }
        }
    }
    if !fallback.is_empty() {
        warn!(columns = fallback.len(), "type inference fell back to rules");
    }
    InferOutcome { types, fallback, transport_failed: false }
}
