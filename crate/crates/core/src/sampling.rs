//! Replicate dataset sampling and the external expert-authored dataset.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError};
use crate::evaluation::ActionLabel;
use crate::gateway::derive_seed;
use crate::triage::TriageTag;

/// Per-tag case counts of a dataset configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution")]
pub struct TagDistribution {
    pub counts: BTreeMap<TriageTag, usize>,
    pub n: usize,
}

#[derive(Deserialize)]
struct RawDistribution {
    counts: BTreeMap<TriageTag, usize>,
    n: Option<usize>,
}

impl TryFrom<RawDistribution> for TagDistribution {
    type Error = String;

    fn try_from(raw: RawDistribution) -> Result<Self, String> {
        let dist = TagDistribution::new(raw.counts);
        match raw.n {
            Some(n) if n != dist.n => Err(format!("n = {n} but counts sum to {}", dist.n)),
            _ => Ok(dist),
        }
    }
}

impl TagDistribution {
    pub fn new(counts: BTreeMap<TriageTag, usize>) -> Self {
        let mut full: BTreeMap<TriageTag, usize> = TriageTag::ALL.iter().map(|t| (*t, 0)).collect();
        full.extend(counts);
        let n = full.values().sum();
        TagDistribution { counts: full, n }
    }

    /// Counts in `Green, Yellow, Red, Black` order.
    pub fn from_array(counts: [usize; 4]) -> Self {
        Self::new(TriageTag::ALL.into_iter().zip(counts).collect())
    }

    /// The external adult benchmark's distribution `{18, 11, 22, 3}`.
    pub fn matched() -> Self {
        Self::from_array([18, 11, 22, 3])
    }

    pub fn uniform(n: usize) -> Result<Self, SamplingError> {
        if n == 0 || !n.is_multiple_of(4) {
            return Err(SamplingError::InvalidConfig(format!("uniform distribution needs n divisible by 4, got {n}")));
        }
        Ok(Self::from_array([n / 4; 4]))
    }

    pub fn count(&self, tag: TriageTag) -> usize {
        self.counts.get(&tag).copied().unwrap_or(0)
    }

    pub fn as_array(&self) -> [usize; 4] {
        TriageTag::ALL.map(|t| self.count(t))
    }

    /// `{18, 11, 22, 3}` style rendering.
    pub fn display(&self) -> String {
        let parts: Vec<String> = self.as_array().iter().map(|c| c.to_string()).collect();
        format!("{{{}}}", parts.join(", "))
    }

    pub fn is_uniform(&self) -> bool {
        let a = self.as_array();
        a.iter().all(|&c| c == a[0])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub config_id: String,
    pub distribution: TagDistribution,
    pub replicates: usize,
    pub seed: u64,
}

impl SamplingConfig {
    pub const DEFAULT_REPLICATES: usize = 10;

    pub fn new(distribution: TagDistribution, seed: u64) -> Self {
        let kind = if distribution == TagDistribution::matched() {
            "matched"
        } else if distribution.is_uniform() {
            "uniform"
        } else {
            "custom"
        };
        SamplingConfig {
            config_id: format!("{kind}-n{}", distribution.n),
            distribution,
            replicates: Self::DEFAULT_REPLICATES,
            seed,
        }
    }
}

/// One replicate dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub config_id: String,
    pub replicate: usize,
    pub distribution: TagDistribution,
    pub case_ids: Vec<String>,
    pub seed: u64,
}

impl DatasetManifest {
    pub fn manifest_id(&self) -> String {
        format!("{}-r{:02}", self.config_id, self.replicate)
    }

    pub fn file_name(&self) -> String {
        format!("{}.json", self.manifest_id())
    }

    pub fn load(path: &Path) -> Result<Self, SamplingError> {
        let text = fs::read_to_string(path).map_err(|e| SamplingError::Format(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| SamplingError::Format(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, dir: &Path) -> Result<std::path::PathBuf, CorpusError> {
        let path = dir.join(self.file_name());
        crate::corpus::write_json(&path, self)?;
        Ok(path)
    }
}

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("insufficient {tag} cases: need {needed}, corpus has {available}")]
    InsufficientPool { tag: TriageTag, needed: usize, available: usize },
    #[error("invalid sampling configuration: {0}")]
    InvalidConfig(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("distribution mismatch: expected {expected}, found {found}")]
    DistributionMismatch { expected: String, found: String },
}

/// Draw `replicates` pairwise-disjoint datasets, each matching the
/// distribution exactly. Disjointness holds within one configuration only.
pub fn sample_replicates(corpus: &Corpus, config: &SamplingConfig) -> Result<Vec<DatasetManifest>, SamplingError> {
    if config.replicates == 0 {
        return Err(SamplingError::InvalidConfig("replicates must be positive".into()));
    }
    if config.distribution.n == 0 {
        return Err(SamplingError::InvalidConfig("distribution is empty".into()));
    }
    let mut pools: BTreeMap<TriageTag, Vec<&str>> = BTreeMap::new();
    for case in &corpus.cases {
        pools.entry(case.tag).or_default().push(case.id.as_str());
    }

    let mut per_replicate: Vec<Vec<String>> = vec![Vec::with_capacity(config.distribution.n); config.replicates];
    for tag in TriageTag::ALL {
        let k = config.distribution.count(tag);
        if k == 0 {
            continue;
        }
        let needed = k * config.replicates;
        let mut pool = pools.remove(&tag).unwrap_or_default();
        if pool.len() < needed {
            return Err(SamplingError::InsufficientPool { tag, needed, available: pool.len() });
        }
        // Sorting first makes the draw independent of corpus file order.
        pool.sort_unstable();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &format!("{}:{tag}", config.config_id)));
        pool.shuffle(&mut rng);
        for (r, chunk) in pool[..needed].chunks(k).enumerate() {
            per_replicate[r].extend(chunk.iter().map(|s| s.to_string()));
        }
    }

    Ok(per_replicate
        .into_iter()
        .enumerate()
        .map(|(r, mut ids)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &format!("{}:order:{r}", config.config_id)));
            ids.shuffle(&mut rng);
            DatasetManifest {
                config_id: config.config_id.clone(),
                replicate: r,
                distribution: config.distribution.clone(),
                case_ids: ids,
                seed: config.seed,
            }
        })
        .collect())
}

/// A case from the external expert-authored benchmark. No vitals layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalCase {
    pub id: String,
    pub tag: TriageTag,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalDataset {
    pub cases: Vec<ExternalCase>,
    pub dropped_pediatric: usize,
    pub distribution: TagDistribution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MismatchPolicy {
    #[default]
    Warn,
    Fail,
}

/// Env var naming the external adult benchmark file.
pub const TRIAGE_ADULT_ENV: &str = "TRIAGE_ADULT_PATH";

const TAG_COLUMNS: [&str; 8] = ["triage_tag", "tag", "label", "answer", "gold", "ground_truth", "category", "color"];
const TEXT_COLUMNS: [&str; 8] =
    ["patient_description", "description", "scenario", "case", "text", "question", "prompt", "narrative"];
const ID_COLUMNS: [&str; 4] = ["id", "case_id", "idx", "index"];
const PROTOCOL_COLUMNS: [&str; 8] =
    ["protocol", "triage_system", "algorithm", "population", "age_group", "type", "subset", "split"];
const PEDIATRIC_FLAGS: [&str; 3] = ["pediatric", "is_pediatric", "paediatric"];

/// Parse a tag written either as a colour or as a START action label.
pub fn parse_tag_label(raw: &str) -> Option<TriageTag> {
    let cleaned = raw.trim().trim_matches(|c: char| !c.is_alphanumeric());
    cleaned.parse::<TriageTag>().ok().or_else(|| ActionLabel::normalize(cleaned).map(ActionLabel::tag))
}

fn cell_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn lookup<'a>(row: &'a HashMap<String, Value>, names: &[&str]) -> Option<&'a Value> {
    names.iter().find_map(|n| row.get(*n))
}

fn is_pediatric(row: &HashMap<String, Value>) -> bool {
    if let Some(v) = lookup(row, &PEDIATRIC_FLAGS) {
        return match v {
            Value::Bool(b) => *b,
            other => cell_text(other).is_some_and(|s| matches!(s.trim().to_lowercase().as_str(), "true" | "1" | "yes")),
        };
    }
    PROTOCOL_COLUMNS.iter().filter_map(|c| row.get(*c)).filter_map(cell_text).any(|s| {
        let s = s.to_lowercase();
        s.contains("jump") || s.contains("pediatric") || s.contains("paediatric") || s.contains("child")
    })
}

fn read_rows(path: &Path) -> Result<Vec<HashMap<String, Value>>, SamplingError> {
    let fmt_err = |m: String| SamplingError::Format(format!("{}: {m}", path.display()));
    let text = fs::read_to_string(path).map_err(|e| fmt_err(e.to_string()))?;
    if text.trim().is_empty() {
        return Err(fmt_err("file is empty".into()));
    }
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_lowercase();
    let lower_keys = |m: serde_json::Map<String, Value>| -> HashMap<String, Value> {
        m.into_iter().map(|(k, v)| (k.trim().to_lowercase(), v)).collect()
    };
    let rows = match ext.as_str() {
        "csv" | "tsv" => {
            let mut reader = csv::ReaderBuilder::new()
                .delimiter(if ext == "tsv" { b'\t' } else { b',' })
                .from_reader(text.as_bytes());
            let headers: Vec<String> =
                reader.headers().map_err(|e| fmt_err(e.to_string()))?.iter().map(|h| h.trim().to_lowercase()).collect();
            let mut rows = Vec::new();
            for record in reader.records() {
                let record = record.map_err(|e| fmt_err(e.to_string()))?;
                rows.push(
                    headers.iter().cloned().zip(record.iter().map(|c| Value::String(c.to_string()))).collect(),
                );
            }
            rows
        }
        _ => {
            let trimmed = text.trim_start();
            let values: Vec<Value> = if trimmed.starts_with('[') || (ext == "json" && trimmed.starts_with('{')) {
                match serde_json::from_str::<Value>(&text).map_err(|e| fmt_err(e.to_string()))? {
                    Value::Array(a) => a,
                    Value::Object(o) => match ["data", "rows", "train", "cases"].iter().find_map(|k| o.get(*k)) {
                        Some(Value::Array(a)) => a.clone(),
                        _ => vec![Value::Object(o)],
                    },
                    _ => return Err(fmt_err("expected an array of records".into())),
                }
            } else {
                text.lines()
                    .filter(|l| !l.trim().is_empty())
                    .enumerate()
                    .map(|(i, l)| serde_json::from_str(l).map_err(|e| fmt_err(format!("line {}: {e}", i + 1))))
                    .collect::<Result<_, _>>()?
            };
            values
                .into_iter()
                .map(|v| match v {
                    Value::Object(m) => Ok(lower_keys(m)),
                    _ => Err(fmt_err("expected object records".into())),
                })
                .collect::<Result<_, _>>()?
        }
    };
    if rows.is_empty() {
        return Err(fmt_err("no records".into()));
    }
    Ok(rows)
}

/// Load the external benchmark, dropping pediatric rows. Accepts CSV/TSV,
/// a JSON array, or JSONL with conventional column names.
pub fn load_triage_adult(path: &Path, policy: MismatchPolicy) -> Result<ExternalDataset, SamplingError> {
    let rows = read_rows(path)?;
    let mut cases = Vec::new();
    let mut dropped = 0;
    for (i, row) in rows.iter().enumerate() {
        if is_pediatric(row) {
            dropped += 1;
            continue;
        }
        let raw_tag = lookup(row, &TAG_COLUMNS)
            .and_then(cell_text)
            .ok_or_else(|| SamplingError::Format(format!("row {}: no tag column", i + 1)))?;
        let tag = parse_tag_label(&raw_tag)
            .ok_or_else(|| SamplingError::Format(format!("row {}: unrecognized tag {raw_tag:?}", i + 1)))?;
        let description = lookup(row, &TEXT_COLUMNS)
            .and_then(cell_text)
            .filter(|s| !s.trim().is_empty())
            .ok_or_else(|| SamplingError::Format(format!("row {}: no description column", i + 1)))?;
        let id = lookup(row, &ID_COLUMNS).and_then(cell_text).unwrap_or_else(|| format!("ext-{:03}", i + 1));
        cases.push(ExternalCase { id, tag, description: description.trim().to_string() });
    }
    if cases.is_empty() {
        return Err(SamplingError::Format(format!("{}: no adult cases", path.display())));
    }
    let mut counts = BTreeMap::new();
    for c in &cases {
        *counts.entry(c.tag).or_insert(0) += 1;
    }
    let distribution = TagDistribution::new(counts);
    let expected = TagDistribution::matched();
    if distribution != expected {
        match policy {
            MismatchPolicy::Fail => {
                return Err(SamplingError::DistributionMismatch {
                    expected: expected.display(),
                    found: distribution.display(),
                })
            }
            MismatchPolicy::Warn => log::warn!(
                "external dataset distribution {} differs from {}",
                distribution.display(),
                expected.display()
            ),
        }
    }
    Ok(ExternalDataset { cases, dropped_pediatric: dropped, distribution })
}
