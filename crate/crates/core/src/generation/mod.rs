//! Candidate parsing and rejection-sampling corpus construction.

pub mod prompt;

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{self, Corpus, CorpusError, StagedDir};
use crate::gateway::{ChatBackend, ChatRequest, GatewayError, DEFAULT_GENERATION_MAX_TOKENS};
use crate::schema::{extract_first_object, CandidateCase, SchemaError};
use crate::triage::{Provenance, SynStartsCase, TriageTag};
use crate::validation::{validate_candidate, RULE_SET_VERSION};

pub use prompt::{
    render_generation_prompt, GenerationPromptSpec, TemplateError, DEFAULT_FEW_SHOT, GENERATION_TEMPLATE,
    START_DESCRIPTION,
};

/// System prompt sent alongside the rendered generation prompt.
pub const GENERATION_SYSTEM_PROMPT: &str = "You are a structured data generation bot.";

#[derive(Debug, Error)]
pub enum CandidateError {
    #[error("no JSON object found in model output")]
    Parse,
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

/// Lowercased, whitespace-collapsed description used for duplicate checks.
pub fn normalize_description(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Content-derived case id.
pub fn case_id(tag: TriageTag, description: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(tag.as_str().as_bytes());
    hasher.update(b"\0");
    hasher.update(normalize_description(description).as_bytes());
    format!("syn-{}", hex::encode(&hasher.finalize()[..8]))
}

/// Extract and strictly check a candidate from raw model output.
pub fn parse_candidate_object(raw: &str) -> Result<CandidateCase, CandidateError> {
    let obj = extract_first_object(raw).ok_or(CandidateError::Parse)?;
    Ok(CandidateCase::from_value(&Value::Object(obj))?)
}

/// Parse raw model output into an (uncertified) case with a fresh id.
pub fn parse_candidate(raw: &str, generator: &str, created_at: &str) -> Result<SynStartsCase, CandidateError> {
    let candidate = parse_candidate_object(raw)?;
    Ok(SynStartsCase {
        id: case_id(candidate.triage_tag, &candidate.patient_description),
        tag: candidate.triage_tag,
        description: candidate.patient_description,
        vitals: candidate.vitals_info,
        provenance: Provenance {
            generator: generator.to_string(),
            created_at: created_at.to_string(),
            rule_set_version: None,
            validation_digest: None,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusBuildConfig {
    pub tags: Vec<TriageTag>,
    pub per_tag: usize,
    pub max_attempts_per_case: usize,
    pub backend: String,
    pub model_id: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub seed: u64,
    pub workers: usize,
}

impl Default for CorpusBuildConfig {
    fn default() -> Self {
        CorpusBuildConfig {
            tags: TriageTag::ALL.to_vec(),
            per_tag: 500,
            max_attempts_per_case: 20,
            backend: "mock".into(),
            model_id: "mock-generator".into(),
            temperature: crate::gateway::DEFAULT_GENERATION_TEMPERATURE,
            max_tokens: DEFAULT_GENERATION_MAX_TOKENS,
            seed: 0,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagStats {
    pub attempts: usize,
    pub parse_failures: usize,
    pub schema_failures: usize,
    pub wrong_tag: usize,
    pub start_failures: usize,
    pub plausibility_failures: usize,
    pub narrative_failures: usize,
    pub duplicates: usize,
    pub accepted: usize,
}

impl TagStats {
    pub fn rejected(&self) -> usize {
        self.attempts - self.accepted
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    pub per_tag: BTreeMap<TriageTag, TagStats>,
}

impl BuildStats {
    pub fn total_accepted(&self) -> usize {
        self.per_tag.values().map(|s| s.accepted).sum()
    }

    pub fn total_rejected(&self) -> usize {
        self.per_tag.values().map(TagStats::rejected).sum()
    }
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("{tag}: {attempts} attempts produced only {accepted} valid cases")]
    AttemptsExhausted { tag: TriageTag, attempts: usize, accepted: usize },
    #[error(transparent)]
    Backend(#[from] GatewayError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("invalid build configuration: {0}")]
    Config(String),
}

pub struct BuildOutput {
    pub corpus: Corpus,
    pub stats: BuildStats,
}

/// Generate, parse and validate candidates until every tag has `per_tag`
/// accepted cases.
///
/// Requests within a tag are issued in batches of `workers`; results are
/// folded in attempt order so the corpus is a function of the responses
/// alone, not of scheduling.
pub fn build_corpus(
    config: &CorpusBuildConfig,
    backend: &dyn ChatBackend,
    created_at: &str,
) -> Result<BuildOutput, GenerationError> {
    if config.per_tag == 0 || config.max_attempts_per_case == 0 {
        return Err(GenerationError::Config("per_tag and max_attempts_per_case must be positive".into()));
    }
    let workers = config.workers.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| GenerationError::Config(e.to_string()))?;

    let generator = format!("{}:{}", backend.id(), config.model_id);
    let mut cases = Vec::with_capacity(config.tags.len() * config.per_tag);
    let mut seen: HashSet<String> = HashSet::new();
    let mut stats = BuildStats::default();

    let mut tags = config.tags.clone();
    tags.sort();
    tags.dedup();
    for tag in tags {
        let prompt = render_generation_prompt(&GenerationPromptSpec::for_tag(tag))?;
        let limit = config.max_attempts_per_case * config.per_tag;
        let tag_stats = stats.per_tag.entry(tag).or_default();
        let mut next_attempt = 0usize;

        while tag_stats.accepted < config.per_tag {
            if next_attempt >= limit {
                return Err(GenerationError::AttemptsExhausted {
                    tag,
                    attempts: tag_stats.attempts,
                    accepted: tag_stats.accepted,
                });
            }
            let batch_end = (next_attempt + workers).min(limit);
            let responses: Vec<Result<String, GatewayError>> = pool.install(|| {
                (next_attempt..batch_end)
                    .into_par_iter()
                    .map(|attempt| {
                        let req = ChatRequest {
                            model_id: config.model_id.clone(),
                            system_prompt: GENERATION_SYSTEM_PROMPT.to_string(),
                            user_prompt: prompt.clone(),
                            temperature: config.temperature,
                            max_tokens: config.max_tokens,
                            request_tag: format!("gen:{tag}:s{}:{attempt}", config.seed),
                        };
                        backend.complete(&req).map(|r| r.text)
                    })
                    .collect()
            });
            next_attempt = batch_end;

            for raw in responses {
                if tag_stats.accepted == config.per_tag {
                    break;
                }
                let raw = raw?;
                tag_stats.attempts += 1;
                let mut case = match parse_candidate(&raw, &generator, created_at) {
                    Ok(case) => case,
                    Err(CandidateError::Parse) => {
                        tag_stats.parse_failures += 1;
                        continue;
                    }
                    Err(CandidateError::Schema(_)) => {
                        tag_stats.schema_failures += 1;
                        continue;
                    }
                };
                if case.tag != tag {
                    tag_stats.wrong_tag += 1;
                    continue;
                }
                let candidate = CandidateCase {
                    triage_tag: case.tag,
                    patient_description: case.description.clone(),
                    vitals_info: case.vitals.clone(),
                };
                let mut report = validate_candidate(&candidate);
                match report.first_failed_stage() {
                    Some(1) => tag_stats.start_failures += 1,
                    Some(2) => tag_stats.plausibility_failures += 1,
                    Some(_) => tag_stats.narrative_failures += 1,
                    None => {
                        if !seen.insert(normalize_description(&case.description)) {
                            tag_stats.duplicates += 1;
                            continue;
                        }
                        report.case_id = Some(case.id.clone());
                        case.provenance.rule_set_version = Some(RULE_SET_VERSION.to_string());
                        case.provenance.validation_digest = Some(report.digest());
                        cases.push(case);
                        tag_stats.accepted += 1;
                    }
                }
            }
        }
        log::info!("{tag}: accepted {} of {} attempts", tag_stats.accepted, tag_stats.attempts);
    }

    Ok(BuildOutput { corpus: Corpus::new(cases)?, stats })
}

/// Write a built corpus directory: cases, stats, config snapshot and the
/// rendered generation prompts. The directory appears only once complete.
pub fn persist_corpus(
    dir: &Path,
    output: &BuildOutput,
    config_snapshot: &impl Serialize,
) -> Result<(), GenerationError> {
    let staged = StagedDir::create(dir)?;
    corpus::write_jsonl(&staged.join(corpus::CORPUS_FILE), &output.corpus.cases)?;
    corpus::write_json(&staged.join(corpus::BUILD_STATS_FILE), &output.stats)?;
    corpus::write_json(&staged.join(corpus::CONFIG_FILE), config_snapshot)?;
    let prompts = staged.join("prompts");
    std::fs::create_dir_all(&prompts).map_err(|source| CorpusError::Io { path: prompts.clone(), source })?;
    for tag in TriageTag::ALL {
        let text = render_generation_prompt(&GenerationPromptSpec::for_tag(tag))?;
        let path = prompts.join(format!("generation_{}.txt", tag.as_str().to_lowercase()));
        std::fs::write(&path, text).map_err(|source| CorpusError::Io { path, source })?;
    }
    staged.commit()?;
    Ok(())
}
