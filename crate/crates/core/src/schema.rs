//! Wire schema for generated candidates and lenient JSON extraction.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::triage::{TriageTag, Vitals};

/// Keys a candidate object may carry, exactly as requested from the generator.
pub const CANDIDATE_KEYS: [&str; 3] = ["triage_tag", "patient_description", "vitals_info"];

/// A generated case before it is assigned an id and certified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateCase {
    pub triage_tag: TriageTag,
    pub patient_description: String,
    pub vitals_info: Vitals,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("schema violation: {0}")]
pub struct SchemaError(pub String);

impl CandidateCase {
    /// Strict conversion: unknown keys, missing keys and wrong value kinds
    /// are all rejected.
    pub fn from_value(value: &Value) -> Result<Self, SchemaError> {
        let obj = value
            .as_object()
            .ok_or_else(|| SchemaError("candidate is not a JSON object".into()))?;
        for key in obj.keys() {
            if !CANDIDATE_KEYS.contains(&key.as_str()) {
                return Err(SchemaError(format!("unknown key {key:?}")));
            }
        }
        for key in CANDIDATE_KEYS {
            if !obj.contains_key(key) {
                return Err(SchemaError(format!("missing key {key:?}")));
            }
        }
        let candidate: CandidateCase =
            serde_json::from_value(value.clone()).map_err(|e| SchemaError(e.to_string()))?;
        if candidate.patient_description.trim().is_empty() {
            return Err(SchemaError("patient_description is empty".into()));
        }
        Ok(candidate)
    }
}

/// Return the first well-formed JSON object embedded in `raw`, skipping any
/// leading or trailing noise (prose, code fences).
pub fn extract_first_object(raw: &str) -> Option<serde_json::Map<String, Value>> {
    for (start, _) in raw.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&raw[start..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            return Some(map);
        }
    }
    None
}
