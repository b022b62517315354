//! Tag-prediction task: prompt, response parsing, scoring and scripted
//! responders for calibration.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, Corpus, CorpusError};
use crate::gateway::{derive_seed, ChatBackend, ChatRequest, ChatResponse, GatewayError};
use crate::sampling::{DatasetManifest, ExternalDataset, TagDistribution};
use crate::schema::extract_first_object;
use crate::triage::{classify, TriageTag, Vitals};

/// Field-triage action category, one per tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionLabel {
    Minor,
    Delayed,
    Immediate,
    ExpectantDeceased,
}

impl ActionLabel {
    pub const ALL: [ActionLabel; 4] =
        [ActionLabel::Minor, ActionLabel::Delayed, ActionLabel::Immediate, ActionLabel::ExpectantDeceased];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionLabel::Minor => "MINOR",
            ActionLabel::Delayed => "DELAYED",
            ActionLabel::Immediate => "IMMEDIATE",
            ActionLabel::ExpectantDeceased => "EXPECTANT/DECEASED",
        }
    }

    pub fn tag(self) -> TriageTag {
        match self {
            ActionLabel::Minor => TriageTag::Green,
            ActionLabel::Delayed => TriageTag::Yellow,
            ActionLabel::Immediate => TriageTag::Red,
            ActionLabel::ExpectantDeceased => TriageTag::Black,
        }
    }

    pub fn from_tag(tag: TriageTag) -> Self {
        match tag {
            TriageTag::Green => ActionLabel::Minor,
            TriageTag::Yellow => ActionLabel::Delayed,
            TriageTag::Red => ActionLabel::Immediate,
            TriageTag::Black => ActionLabel::ExpectantDeceased,
        }
    }

    /// Case-, whitespace- and separator-insensitive lookup.
    pub fn normalize(raw: &str) -> Option<Self> {
        let words: Vec<String> = raw
            .split(|c: char| c.is_whitespace() || matches!(c, '/' | '\\' | '-' | '_' | '|' | ',' | '.' | '&'))
            .filter(|w| !w.is_empty())
            .map(|w| w.to_ascii_uppercase())
            .filter(|w| w != "OR" && w != "AND")
            .collect();
        let words: Vec<&str> = words.iter().map(String::as_str).collect();
        match words.as_slice() {
            ["MINOR"] => Some(ActionLabel::Minor),
            ["DELAYED"] => Some(ActionLabel::Delayed),
            ["IMMEDIATE"] => Some(ActionLabel::Immediate),
            ["EXPECTANT"] | ["DECEASED"] | ["EXPECTANT", "DECEASED"] | ["DECEASED", "EXPECTANT"] => {
                Some(ActionLabel::ExpectantDeceased)
            }
            _ => None,
        }
    }
}

impl Serialize for ActionLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for ActionLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        ActionLabel::normalize(&raw).ok_or_else(|| serde::de::Error::custom(format!("unknown action {raw:?}")))
    }
}

/// Fixed instructions of the tag-prediction task.
pub const TASK_INSTRUCTIONS: &str = r#"You are a doctor working in the emergency room of a hospital.
A colleague of yours runs into the emergency room and shouts: 'There has been a mass casualty incident at the nearby football stadium! A bomb has exploded. Hurry, we need to help!' You and your team rush to the scene, and divide roles.
You must triage all patients. Determine whether a patient goes to MINOR, DELAYED, IMMEDIATE, or EXPECTANT/DECEASED zones.

MINOR: victim with relatively minor injuries, status is unlikely to deteriorate over days.
DELAYED: victim has serious and potentially life-threatening injuries, status is unlikely to deteriorate significantly over several hours.
IMMEDIATE: victim requires medical attention within 60 minutes or less for survival, includes compromises to patient's airway, breathing, and circulation.
EXPECTANT/DECEASED: victim is unlikely to survive given the severity of their injuries, level of available care, or both.

To which category would you assign the following patient?
Respond with a single JSON object containing "reasoning" (string) and "action" (string) fields. Make sure to only use " ", NOT '. Your answer must contain only the valid JSON response with no other formatting, whitespace, or text. Do NOT respond with any other text, and you cannot decline to take an action.
Use the following format: { "reasoning": "Because the patient... they should be assigned category ... ", "action": "MINOR" }"#;

/// The chat-message split of the task prompt: instructions as the system
/// message, the patient description as the user message.
pub fn task_messages(description: &str) -> (String, String) {
    assert!(!description.trim().is_empty(), "patient description must be non-empty");
    (TASK_INSTRUCTIONS.to_string(), description.trim().to_string())
}

/// Full task prompt text with the description appended.
pub fn render_task_prompt(description: &str) -> String {
    let (system, user) = task_messages(description);
    format!("{system}\n\n{user}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureKind {
    ParseFailure,
    InvalidAction,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParsedResponse {
    Answer { reasoning: Option<String>, action: ActionLabel },
    Failure { kind: FailureKind, detail: String },
}

pub fn parse_model_response(raw: &str) -> ParsedResponse {
    let Some(obj) = extract_first_object(raw) else {
        return ParsedResponse::Failure { kind: FailureKind::ParseFailure, detail: "no JSON object".into() };
    };
    let action = obj.iter().find(|(k, _)| k.trim().eq_ignore_ascii_case("action")).map(|(_, v)| v);
    let Some(action) = action else {
        return ParsedResponse::Failure { kind: FailureKind::ParseFailure, detail: "no \"action\" field".into() };
    };
    let Some(text) = action.as_str() else {
        return ParsedResponse::Failure { kind: FailureKind::InvalidAction, detail: format!("action is {action}") };
    };
    let reasoning = obj
        .iter()
        .find(|(k, _)| k.trim().eq_ignore_ascii_case("reasoning"))
        .and_then(|(_, v)| v.as_str())
        .map(str::to_string);
    match ActionLabel::normalize(text) {
        Some(action) => ParsedResponse::Answer { reasoning, action },
        None => ParsedResponse::Failure { kind: FailureKind::InvalidAction, detail: format!("action {text:?}") },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub case_id: String,
    pub model_id: String,
    pub truth: TriageTag,
    pub raw_response: String,
    pub reasoning: Option<String>,
    pub action: Option<ActionLabel>,
    pub predicted: Option<TriageTag>,
    pub correct: bool,
    pub failure_kind: Option<FailureKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Rows are ground truth in tag order; columns are predictions in tag
/// order plus a fifth "unparsed" column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub cells: [[f64; 5]; 4],
}

impl Default for ConfusionMatrix {
    fn default() -> Self {
        ConfusionMatrix { cells: [[0.0; 5]; 4] }
    }
}

impl ConfusionMatrix {
    pub const UNPARSED: usize = 4;

    pub fn add(&mut self, truth: TriageTag, predicted: Option<TriageTag>) {
        let col = predicted.map_or(Self::UNPARSED, TriageTag::index);
        self.cells[truth.index()][col] += 1.0;
    }

    pub fn row_sum(&self, truth: TriageTag) -> f64 {
        self.cells[truth.index()].iter().sum()
    }

    pub fn total(&self) -> f64 {
        self.cells.iter().flatten().sum()
    }

    pub fn trace(&self) -> f64 {
        (0..4).map(|i| self.cells[i][i]).sum()
    }

    pub fn unparsed(&self) -> f64 {
        self.cells.iter().map(|r| r[Self::UNPARSED]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub manifest_id: String,
    pub model_id: String,
    pub backend: String,
    pub temperature: f64,
    pub distribution: TagDistribution,
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub per_tag_accuracy: BTreeMap<TriageTag, f64>,
    pub confusion: ConfusionMatrix,
    pub records: Vec<EvaluationRecord>,
}

impl RunResult {
    fn score(
        manifest_id: &str,
        model_id: &str,
        backend: &str,
        temperature: f64,
        records: Vec<EvaluationRecord>,
    ) -> Self {
        let mut confusion = ConfusionMatrix::default();
        let mut counts: BTreeMap<TriageTag, usize> = BTreeMap::new();
        let mut hits: BTreeMap<TriageTag, usize> = BTreeMap::new();
        for r in &records {
            confusion.add(r.truth, r.predicted);
            *counts.entry(r.truth).or_default() += 1;
            if r.correct {
                *hits.entry(r.truth).or_default() += 1;
            }
        }
        let n = records.len();
        let correct = hits.values().sum();
        let per_tag_accuracy = counts
            .iter()
            .map(|(t, &c)| (*t, hits.get(t).copied().unwrap_or(0) as f64 / c as f64))
            .collect();
        RunResult {
            manifest_id: manifest_id.to_string(),
            model_id: model_id.to_string(),
            backend: backend.to_string(),
            temperature,
            distribution: TagDistribution::new(counts),
            n,
            correct,
            accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
            per_tag_accuracy,
            confusion,
            records,
        }
    }

    pub fn save(&self, dir: &Path) -> Result<(), CorpusError> {
        std::fs::create_dir_all(dir).map_err(|source| CorpusError::Io { path: dir.to_path_buf(), source })?;
        let stem = format!("{}__{}", sanitize(&self.model_id), self.manifest_id);
        corpus::write_json(&dir.join(format!("{stem}.json")), self)?;
        corpus::write_jsonl(&dir.join(format!("{stem}.records.jsonl")), &self.records)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
        serde_json::from_str(&text).map_err(|e| CorpusError::Format {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// File-name-safe form of a model id.
pub fn sanitize(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '.') { c } else { '_' }).collect()
}

/// Load every `*.json` run result under `dir` (records files excluded).
pub fn load_runs(dir: &Path) -> Result<Vec<RunResult>, CorpusError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|source| CorpusError::Io { path: dir.to_path_buf(), source })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| !n.starts_with("config")))
        .collect();
    paths.sort();
    paths.iter().map(|p| RunResult::load(p)).collect()
}

/// One case as presented to the model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalItem {
    pub case_id: String,
    pub truth: TriageTag,
    pub description: String,
}

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("manifest references unknown case {0}")]
    UnknownCase(String),
    #[error("results mix distributions {0} and {1}")]
    MixedDistribution(String, String),
    #[error("no results to aggregate")]
    Empty,
    #[error(transparent)]
    Backend(#[from] GatewayError),
}

pub fn items_for_manifest(corpus: &Corpus, manifest: &DatasetManifest) -> Result<Vec<EvalItem>, EvaluationError> {
    let index = corpus.index();
    manifest
        .case_ids
        .iter()
        .map(|id| {
            let case = index.get(id.as_str()).ok_or_else(|| EvaluationError::UnknownCase(id.clone()))?;
            Ok(EvalItem { case_id: case.id.clone(), truth: case.tag, description: case.description.clone() })
        })
        .collect()
}

pub fn items_for_external(dataset: &ExternalDataset) -> Vec<EvalItem> {
    dataset
        .cases
        .iter()
        .map(|c| EvalItem { case_id: c.id.clone(), truth: c.tag, description: c.description.clone() })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationConfig {
    pub model_id: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub workers: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig { model_id: "mock".into(), temperature: 0.0, max_tokens: 512, workers: 4 }
    }
}

pub fn eval_request_tag(case_id: &str) -> String {
    format!("eval:{case_id}")
}

/// Query the backend once per item and score the answers.
///
/// Transient transport failures (after whatever retry wrapping the backend
/// carries) are recorded as parse failures; credential, request and replay
/// errors abort the run.
pub fn evaluate(
    manifest_id: &str,
    items: &[EvalItem],
    backend: &dyn ChatBackend,
    config: &EvaluationConfig,
) -> Result<RunResult, EvaluationError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .expect("thread pool");
    let outcomes: Vec<Result<EvaluationRecord, GatewayError>> = pool.install(|| {
        items
            .par_iter()
            .map(|item| {
                let (system_prompt, user_prompt) = task_messages(&item.description);
                let req = ChatRequest {
                    model_id: config.model_id.clone(),
                    system_prompt,
                    user_prompt,
                    temperature: config.temperature,
                    max_tokens: config.max_tokens,
                    request_tag: eval_request_tag(&item.case_id),
                };
                let mut record = EvaluationRecord {
                    case_id: item.case_id.clone(),
                    model_id: config.model_id.clone(),
                    truth: item.truth,
                    raw_response: String::new(),
                    reasoning: None,
                    action: None,
                    predicted: None,
                    correct: false,
                    failure_kind: None,
                    detail: None,
                };
                match backend.complete(&req) {
                    Ok(resp) => {
                        match parse_model_response(&resp.text) {
                            ParsedResponse::Answer { reasoning, action } => {
                                record.reasoning = reasoning;
                                record.action = Some(action);
                                record.predicted = Some(action.tag());
                                record.correct = action.tag() == item.truth;
                            }
                            ParsedResponse::Failure { kind, detail } => {
                                record.failure_kind = Some(kind);
                                record.detail = Some(detail);
                            }
                        }
                        record.raw_response = resp.text;
                        Ok(record)
                    }
                    Err(e) if e.is_transient() => {
                        log::warn!("{}: {e}", item.case_id);
                        record.failure_kind = Some(FailureKind::ParseFailure);
                        record.detail = Some(e.to_string());
                        Ok(record)
                    }
                    Err(e) => Err(e),
                }
            })
            .collect()
    });
    let records = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(RunResult::score(manifest_id, &config.model_id, backend.id(), config.temperature, records))
}

/// Entry-wise mean of confusion matrices over replicate runs.
pub fn average_confusions(results: &[RunResult]) -> Result<ConfusionMatrix, EvaluationError> {
    let first = results.first().ok_or(EvaluationError::Empty)?;
    let mut sum = ConfusionMatrix::default();
    for r in results {
        if r.distribution != first.distribution {
            return Err(EvaluationError::MixedDistribution(
                first.distribution.display(),
                r.distribution.display(),
            ));
        }
        for (row, src) in sum.cells.iter_mut().zip(&r.confusion.cells) {
            for (cell, v) in row.iter_mut().zip(src) {
                *cell += v;
            }
        }
    }
    let k = results.len() as f64;
    sum.cells.iter_mut().flatten().for_each(|c| *c /= k);
    Ok(sum)
}

/// Deterministic responders that answer `eval:<case id>` requests.
#[derive(Debug, Clone)]
pub enum ScriptedResponder {
    /// Applies the START classifier to the case's vitals.
    Oracle { truth: HashMap<String, TriageTag> },
    Constant(ActionLabel),
    /// Correct with probability `accuracy`, otherwise a uniformly chosen
    /// wrong action. Draws are seeded per (seed, model id, case).
    Noisy { truth: HashMap<String, TriageTag>, accuracy: f64, seed: u64 },
}

impl ScriptedResponder {
    pub fn oracle<'a>(cases: impl IntoIterator<Item = (&'a str, &'a Vitals)>) -> Self {
        let truth = cases
            .into_iter()
            .filter_map(|(id, v)| classify(v).ok().map(|t| (id.to_string(), t)))
            .collect();
        ScriptedResponder::Oracle { truth }
    }

    pub fn oracle_for(corpus: &Corpus) -> Self {
        Self::oracle(corpus.cases.iter().map(|c| (c.id.as_str(), &c.vitals)))
    }

    pub fn noisy_for<'a>(truth: impl IntoIterator<Item = (&'a str, TriageTag)>, accuracy: f64, seed: u64) -> Self {
        ScriptedResponder::Noisy {
            truth: truth.into_iter().map(|(id, t)| (id.to_string(), t)).collect(),
            accuracy,
            seed,
        }
    }

    fn answer(&self, req: &ChatRequest) -> Result<ActionLabel, GatewayError> {
        let case_id = req
            .request_tag
            .strip_prefix("eval:")
            .ok_or_else(|| GatewayError::InvalidRequest(format!("not an eval request: {}", req.request_tag)))?;
        let lookup = |truth: &HashMap<String, TriageTag>| {
            truth
                .get(case_id)
                .copied()
                .ok_or_else(|| GatewayError::InvalidRequest(format!("scripted responder has no case {case_id}")))
        };
        match self {
            ScriptedResponder::Oracle { truth } => Ok(ActionLabel::from_tag(lookup(truth)?)),
            ScriptedResponder::Constant(a) => Ok(*a),
            ScriptedResponder::Noisy { truth, accuracy, seed } => {
                let tag = lookup(truth)?;
                let mut rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(*seed, &format!("{}:{}", req.model_id, req.request_tag)));
                if rng.random_bool(accuracy.clamp(0.0, 1.0)) {
                    Ok(ActionLabel::from_tag(tag))
                } else {
                    let wrong: Vec<TriageTag> = TriageTag::ALL.into_iter().filter(|t| *t != tag).collect();
                    Ok(ActionLabel::from_tag(wrong[rng.random_range(0..wrong.len())]))
                }
            }
        }
    }
}

impl ChatBackend for ScriptedResponder {
    fn id(&self) -> &str {
        match self {
            ScriptedResponder::Oracle { .. } => "scripted-oracle",
            ScriptedResponder::Constant(_) => "scripted-constant",
            ScriptedResponder::Noisy { .. } => "scripted-noisy",
        }
    }

    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        req.check()?;
        let action = self.answer(req)?;
        let text = serde_json::json!({
            "reasoning": format!("Scripted answer for {}.", req.request_tag),
            "action": action.as_str(),
        })
        .to_string();
        Ok(ChatResponse { text, latency: Duration::ZERO, token_usage: None, backend: self.id().to_string() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_mapping_is_bijective() {
        for tag in TriageTag::ALL {
            assert_eq!(ActionLabel::from_tag(tag).tag(), tag);
        }
        for a in ActionLabel::ALL {
            assert_eq!(ActionLabel::normalize(a.as_str()), Some(a));
        }
    }

    #[test]
    fn normalization_table() {
        let black = Some(ActionLabel::ExpectantDeceased);
        for raw in ["expectant", "DECEASED", "Expectant / Deceased", "expectant-deceased", "EXPECTANT_DECEASED"] {
            assert_eq!(ActionLabel::normalize(raw), black, "{raw}");
        }
        assert_eq!(ActionLabel::normalize("  minor "), Some(ActionLabel::Minor));
        assert_eq!(ActionLabel::normalize("RED"), None);
        assert_eq!(ActionLabel::normalize("MINOR DELAYED"), None);
    }

    #[test]
    fn parses_responses() {
        assert_eq!(
            parse_model_response(r#"{ "reasoning": "Because the patient walks", "action": "MINOR" }"#),
            ParsedResponse::Answer { reasoning: Some("Because the patient walks".into()), action: ActionLabel::Minor }
        );
        assert_eq!(
            parse_model_response(r#"{"action":"expectant"}"#),
            ParsedResponse::Answer { reasoning: None, action: ActionLabel::ExpectantDeceased }
        );
        assert!(matches!(
            parse_model_response("The patient is RED."),
            ParsedResponse::Failure { kind: FailureKind::ParseFailure, .. }
        ));
        assert!(matches!(
            parse_model_response(r#"{"action":"URGENT"}"#),
            ParsedResponse::Failure { kind: FailureKind::InvalidAction, .. }
        ));
        assert!(matches!(
            parse_model_response(r#"{"reasoning":"x"}"#),
            ParsedResponse::Failure { kind: FailureKind::ParseFailure, .. }
        ));
    }

    #[test]
    fn prompt_opens_with_scenario() {
        let p = render_task_prompt("30-year-old male, walking.");
        assert!(p.contains("There has been a mass casualty incident"));
        assert!(p.ends_with("\n\n30-year-old male, walking."));
    }

    #[test]
    #[should_panic]
    fn empty_description_panics() {
        render_task_prompt("  ");
    }

    fn items(counts: [usize; 4]) -> Vec<EvalItem> {
        TriageTag::ALL
            .iter()
            .zip(counts)
            .flat_map(|(&tag, k)| {
                (0..k).map(move |i| EvalItem {
                    case_id: format!("{tag}-{i}"),
                    truth: tag,
                    description: format!("{tag} case {i}"),
                })
            })
            .collect()
    }

    #[test]
    fn constant_minor_scores_green_share() {
        let run = evaluate(
            "m",
            &items([18, 11, 22, 3]),
            &ScriptedResponder::Constant(ActionLabel::Minor),
            &EvaluationConfig::default(),
        )
        .unwrap();
        assert_eq!(run.correct, 18);
        assert!((run.accuracy - 18.0 / 54.0).abs() < 1e-15);
        assert_eq!(run.confusion.trace(), 18.0);
        assert_eq!(run.confusion.row_sum(TriageTag::Red), 22.0);
        assert_eq!(run.per_tag_accuracy[&TriageTag::Green], 1.0);
        assert_eq!(run.per_tag_accuracy[&TriageTag::Black], 0.0);
    }

    struct Garbage;
    impl ChatBackend for Garbage {
        fn id(&self) -> &str {
            "garbage"
        }
        fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
            if req.request_tag.ends_with('0') {
                return Err(GatewayError::BackendUnavailable("down".into()));
            }
            Ok(ChatResponse { text: "no idea".into(), latency: Duration::ZERO, token_usage: None, backend: "g".into() })
        }
    }

    #[test]
    fn failures_land_in_unparsed_column() {
        let run = evaluate("m", &items([2, 2, 2, 2]), &Garbage, &EvaluationConfig::default()).unwrap();
        assert_eq!(run.accuracy, 0.0);
        assert_eq!(run.confusion.unparsed(), 8.0);
        assert!(run.records.iter().all(|r| r.failure_kind == Some(FailureKind::ParseFailure)));
    }

    #[test]
    fn averaging() {
        let base = evaluate(
            "a",
            &items([3, 3, 3, 3]),
            &ScriptedResponder::Constant(ActionLabel::Delayed),
            &EvaluationConfig::default(),
        )
        .unwrap();
        let mut other = base.clone();
        other.confusion.cells[0][1] -= 2.0;
        other.confusion.cells[0][0] += 2.0;
        let avg = average_confusions(&[base.clone(), other]).unwrap();
        assert_eq!(avg.cells[0][0], 1.0);
        assert_eq!(avg.cells[0][1], 2.0);
        assert_eq!(average_confusions(&vec![base.clone(); 10]).unwrap(), base.confusion);
        let mut mixed = base.clone();
        mixed.distribution = TagDistribution::matched();
        assert!(matches!(average_confusions(&[base, mixed]), Err(EvaluationError::MixedDistribution(..))));
    }
}
