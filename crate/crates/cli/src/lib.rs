//! `synstarts` command-line pipeline: corpus generation, validation,
//! sampling, evaluation, analysis and the review server.

pub mod backend;
pub mod serve;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use synstarts_core::corpus::{self, Corpus, CorpusError, StagedDir};
use synstarts_core::evaluation::{
    self, average_confusions, evaluate, items_for_external, items_for_manifest, ActionLabel, EvalItem,
    EvaluationConfig, EvaluationError, RunResult, ScriptedResponder,
};
use synstarts_core::gateway::{derive_seed, GatewayError, MockConfig};
use synstarts_core::generation::{build_corpus, persist_corpus, CorpusBuildConfig, GenerationError};
use synstarts_core::review::ReviewError;
use synstarts_core::sampling::{
    load_triage_adult, sample_replicates, DatasetManifest, MismatchPolicy, SamplingConfig, SamplingError,
    TagDistribution,
};
use synstarts_core::stats::{self, StatsError};
use synstarts_core::validation::{validate, validate_value, ValidationReport};
use synstarts_core::{SynStartsCase, TriageTag};

use backend::BackendSpec;

pub const DEFAULT_SEED: u64 = 0;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_BACKEND: i32 = 4;

/// Manifest id given to runs on the external adult dataset.
pub const EXTERNAL_MANIFEST_ID: &str = "triage-adult";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Backend(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Backend(_) => EXIT_BACKEND,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Backend(m) => m,
        }
    }

    pub(crate) fn backend(e: GatewayError) -> Self {
        match e {
            GatewayError::Io(_) | GatewayError::ReplayMiss { .. } => CliError::Data(e.to_string()),
            GatewayError::InvalidRequest(_) => CliError::Usage(e.to_string()),
            _ => CliError::Backend(e.to_string()),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SamplingError> for CliError {
    fn from(e: SamplingError) -> Self {
        match e {
            SamplingError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<GenerationError> for CliError {
    fn from(e: GenerationError) -> Self {
        match e {
            GenerationError::Backend(g) => CliError::backend(g),
            GenerationError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvaluationError> for CliError {
    fn from(e: EvaluationError) -> Self {
        match e {
            EvaluationError::Backend(g) => CliError::backend(g),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ReviewError> for CliError {
    fn from(e: ReviewError) -> Self {
        match e {
            ReviewError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "synstarts", version, about = "Synthetic START-triage benchmark pipeline")]
pub struct Cli {
    /// Root seed; every module seed is derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Summary format on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Worker threads for parallel subcommands.
    #[arg(long, global = true, default_value_t = 4)]
    pub workers: usize,
    /// JSON file of flag values (keys are long flag names); explicit flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a validated corpus by rejection sampling.
    GenerateCorpus(GenerateArgs),
    /// Re-run the three validation stages over a corpus or candidate file.
    Validate(ValidateArgs),
    /// Draw disjoint replicate datasets from a corpus.
    Sample(SampleArgs),
    /// Score a model on manifests or the external dataset.
    Evaluate(EvaluateArgs),
    /// Statistical reports over run results.
    Analyze(AnalyzeArgs),
    /// Serve the blinded pairwise review study.
    ReviewServe(ReviewServeArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenerateCorpus(_) => "generate-corpus",
            Command::Validate(_) => "validate",
            Command::Sample(_) => "sample",
            Command::Evaluate(_) => "evaluate",
            Command::Analyze(_) => "analyze",
            Command::ReviewServe(_) => "review-serve",
        }
    }
}

pub const SUBCOMMANDS: [&str; 6] = ["generate-corpus", "validate", "sample", "evaluate", "analyze", "review-serve"];

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    /// `all` or a comma-separated list of tags.
    #[arg(long, default_value = "all")]
    pub tags: String,
    #[arg(long, default_value_t = 500)]
    pub per_tag: usize,
    /// mock, replay, openai, anthropic, or an OpenAI-compatible provider name.
    #[arg(long, default_value = "mock")]
    pub backend: String,
    #[arg(long)]
    pub model: Option<String>,
    /// Cassette to replay from (`--backend replay`).
    #[arg(long)]
    pub cassette: Option<PathBuf>,
    /// Record every completion to this cassette.
    #[arg(long)]
    pub record: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub max_attempts: usize,
    #[arg(long, default_value_t = synstarts_core::gateway::DEFAULT_GENERATION_TEMPERATURE)]
    pub temperature: f64,
    #[arg(long, default_value_t = 1024)]
    pub max_tokens: u32,
    #[arg(long, default_value_t = 0.0)]
    pub mock_defect_rate: f64,
    #[arg(long, default_value_t = 0.5)]
    pub mock_optional_rate: f64,
    #[arg(long, default_value_t = 0.2)]
    pub mock_wrapper_rate: f64,
    #[arg(long, default_value_t = 5)]
    pub retries: u32,
    /// Request rate cap for live providers.
    #[arg(long)]
    pub rps: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ValidateArgs {
    /// Corpus directory or JSONL file of cases or raw candidates.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Directory for per-case reports.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Dist {
    Matched,
    Uniform,
    Custom,
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum, default_value_t = Dist::Matched)]
    pub dist: Dist,
    /// Total size for `uniform`.
    #[arg(long)]
    pub n: Option<usize>,
    /// `G,Y,R,B` counts for `custom`.
    #[arg(long)]
    pub counts: Option<String>,
    #[arg(long, default_value_t = SamplingConfig::DEFAULT_REPLICATES)]
    pub replicates: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    /// Manifest file or directory of manifests; repeatable.
    #[arg(long)]
    pub manifest: Vec<PathBuf>,
    /// Corpus the manifests refer to.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Evaluate on the external adult dataset instead of manifests.
    #[arg(long)]
    pub external: Option<PathBuf>,
    #[arg(long)]
    pub model: String,
    /// mock-oracle, mock-constant, mock-noisy, replay, openai, anthropic, or a provider name.
    #[arg(long)]
    pub backend: String,
    /// Accuracy of `mock-noisy`.
    #[arg(long, default_value_t = 0.8)]
    pub accuracy: f64,
    /// Action returned by `mock-constant`.
    #[arg(long, default_value = "MINOR")]
    pub constant: String,
    #[arg(long)]
    pub cassette: Option<PathBuf>,
    #[arg(long)]
    pub record: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 512)]
    pub max_tokens: u32,
    #[arg(long, default_value_t = 5)]
    pub retries: u32,
    #[arg(long)]
    pub rps: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Report {
    Fidelity,
    Distribution,
    Scale,
    Linguistics,
    Confusion,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyzeArgs {
    /// Directory of run results.
    #[arg(long)]
    pub runs: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub report: Report,
    #[arg(long)]
    pub out: PathBuf,
    /// Configuration compared against the external runs (fidelity).
    #[arg(long, default_value = "matched-n54")]
    pub matched_config: String,
    /// Configurations (A) and (B) for the distribution report.
    #[arg(long, default_value = "matched-n54")]
    pub config_a: String,
    #[arg(long, default_value = "uniform-n56")]
    pub config_b: String,
    /// Configuration prefix of the scale tiers.
    #[arg(long, default_value = "uniform-n")]
    pub scale_prefix: String,
    /// Configuration averaged for the confusion report.
    #[arg(long, default_value = "uniform-n200")]
    pub confusion_config: String,
    /// External dataset file (linguistics).
    #[arg(long)]
    pub external: Option<PathBuf>,
    /// Corpus and manifest directory (linguistics).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub manifests: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ReviewServeArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub external: PathBuf,
    /// Append-only session log.
    #[arg(long, default_value = "review_log.jsonl")]
    pub log: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
    #[arg(long, default_value_t = synstarts_core::review::DEFAULT_QUESTIONS)]
    pub questions: usize,
    /// Give every rater the same pairs (otherwise seeds differ per rater).
    #[arg(long)]
    pub same_pairs: bool,
    /// Directory with the built review UI, served at `/`.
    #[arg(long)]
    pub ui: Option<PathBuf>,
}

/// What a subcommand reports back.
pub struct Summary {
    pub text: String,
    pub json: Value,
    pub exit_code: i32,
}

impl Summary {
    pub(crate) fn ok(text: String, json: Value) -> Self {
        Summary { text, json, exit_code: EXIT_OK }
    }
}

struct Ctx {
    seed: u64,
    workers: usize,
    argv: Vec<String>,
}

impl Ctx {
    fn module_seed(&self, module: &str) -> u64 {
        derive_seed(self.seed, module)
    }

    /// Config snapshot written next to every output.
    fn snapshot(&self, command: &str, args: &impl Serialize, seeds: &[(&str, u64)]) -> Value {
        json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "argv": self.argv,
            "seed": self.seed,
            "derived_seeds": seeds.iter().map(|(k, v)| (k.to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
            "workers": self.workers,
            "args": args,
        })
    }
}

/// Splice values from a `--config` JSON file into argv after the
/// subcommand, skipping flags given explicitly.
pub fn expand_config(argv: Vec<String>) -> Result<Vec<String>, CliError> {
    let mut path = None;
    for (i, a) in argv.iter().enumerate() {
        if a == "--config" {
            path = argv.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let text = fs::read_to_string(&path).map_err(|e| CliError::Usage(format!("--config {path}: {e}")))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("--config {path}: {e}")))?;
    let Value::Object(map) = value else {
        return Err(CliError::Usage(format!("--config {path}: expected a JSON object")));
    };
    let Some(pos) = argv.iter().position(|a| SUBCOMMANDS.contains(&a.as_str())) else { return Ok(argv) };
    let given = |flag: &str| argv.iter().any(|a| a == flag || a.starts_with(&format!("{flag}=")));
    let mut extra = Vec::new();
    for (key, v) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        if flag == "--config" || given(&flag) {
            continue;
        }
        let scalar = |v: &Value| match v {
            Value::String(s) => Ok(s.clone()),
            Value::Number(n) => Ok(n.to_string()),
            other => Err(CliError::Usage(format!("--config: unsupported value for {key}: {other}"))),
        };
        match &v {
            Value::Bool(true) => extra.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                for item in items {
                    extra.push(flag.clone());
                    extra.push(scalar(item)?);
                }
            }
            other => {
                extra.push(flag);
                extra.push(scalar(other)?);
            }
        }
    }
    let mut out = argv[..=pos].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[pos + 1..]);
    Ok(out)
}

/// Parse and execute; returns the process exit status.
pub fn run(argv: Vec<String>) -> i32 {
    let argv = match expand_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {}", e.message());
            return e.code();
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();

    let seeded = !matches!(cli.command, Command::Validate(_) | Command::Analyze(_));
    let seed = cli.seed.unwrap_or_else(|| {
        if seeded {
            eprintln!(
            "WARNING: no --seed given; using the default seed {DEFAULT_SEED}. Pass --seed to make this run's randomness explicit."
            );
        }
        DEFAULT_SEED
    });
    let ctx = Ctx { seed, workers: cli.workers.max(1), argv: argv.clone() };
    let command = cli.command.name();
    let outcome = match &cli.command {
        Command::GenerateCorpus(a) => generate_corpus(&ctx, a),
        Command::Validate(a) => validate_cmd(&ctx, a),
        Command::Sample(a) => sample_cmd(&ctx, a),
        Command::Evaluate(a) => evaluate_cmd(&ctx, a),
        Command::Analyze(a) => analyze_cmd(&ctx, a),
        Command::ReviewServe(a) => serve::review_serve(ctx.seed, a),
    };
    match outcome {
        Ok(summary) => {
            match cli.format {
                Format::Json => println!("{}", summary.json),
                Format::Text => println!("{}", summary.text),
            }
            summary.exit_code
        }
        Err(e) => {
            match cli.format {
                Format::Json => println!("{}", json!({"command": command, "error": e.message(), "exit_code": e.code()})),
                Format::Text => {}
            }
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn parse_tags(raw: &str) -> Result<Vec<TriageTag>, CliError> {
    if raw.trim().eq_ignore_ascii_case("all") {
        return Ok(TriageTag::ALL.to_vec());
    }
    raw.split(',').map(|t| t.parse::<TriageTag>().map_err(|e| CliError::Usage(e.to_string()))).collect()
}

/// Creation time stamped into case provenance. `SOURCE_DATE_EPOCH` pins it
/// so reruns can be byte-identical.
fn timestamp() -> String {
    let pinned = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0));
    pinned.unwrap_or_else(chrono::Utc::now).to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn generate_corpus(ctx: &Ctx, a: &GenerateArgs) -> Result<Summary, CliError> {
    if !(0.0..=1.0).contains(&a.mock_defect_rate) {
        return Err(CliError::Usage("--mock-defect-rate must be in [0, 1]".into()));
    }
    let mock_seed = ctx.module_seed("mock");
    let build_seed = ctx.module_seed("generate-corpus");
    let choice = BackendSpec {
        name: &a.backend,
        cassette: a.cassette.as_ref(),
        record: a.record.as_ref(),
        retries: a.retries,
        rps: a.rps,
    };
    let mock = MockConfig {
        seed: mock_seed,
        defect_rate: a.mock_defect_rate,
        optional_field_rate: a.mock_optional_rate,
        wrapper_rate: a.mock_wrapper_rate,
    };
    let model_id = match (&a.model, a.backend.as_str()) {
        (Some(m), _) => m.clone(),
        (None, "mock") => "mock-generator".to_string(),
        (None, _) => return Err(CliError::Usage("--model is required for this backend".into())),
    };
    let config = CorpusBuildConfig {
        tags: parse_tags(&a.tags)?,
        per_tag: a.per_tag,
        max_attempts_per_case: a.max_attempts,
        backend: a.backend.clone(),
        model_id,
        temperature: a.temperature,
        max_tokens: a.max_tokens,
        seed: build_seed,
        workers: ctx.workers,
    };
    let snapshot = ctx.snapshot(
        "generate-corpus",
        &json!({"cli": a, "build": config}),
        &[("mock", mock_seed), ("generate-corpus", build_seed)],
    );
    let backend = backend::generation_backend(&choice, mock)?;
    let output = match build_corpus(&config, backend.as_ref(), &timestamp()) {
        Ok(o) => o,
        Err(e) => {
            quarantine(&a.out, &snapshot, &e.to_string())?;
            return Err(e.into());
        }
    };
    persist_corpus(&a.out, &output, &snapshot)?;
    let counts = output.corpus.tag_counts();
    let text = format!(
        "wrote {} cases to {} ({}); rejected {} candidates",
        output.corpus.len(),
        a.out.display(),
        counts.iter().map(|(t, n)| format!("{t} {n}")).collect::<Vec<_>>().join(", "),
        output.stats.total_rejected()
    );
    Ok(Summary::ok(
        text,
        json!({
            "command": "generate-corpus",
            "out": a.out,
            "cases": output.corpus.len(),
            "per_tag": counts,
            "rejected": output.stats.total_rejected(),
            "stats": output.stats,
        }),
    ))
}

/// Record a failed run under `<out>.partial` without touching `out`.
fn quarantine(out: &Path, snapshot: &Value, error: &str) -> Result<(), CliError> {
    let staged = StagedDir::create(out)?;
    corpus::write_json(&staged.join(corpus::CONFIG_FILE), snapshot)?;
    corpus::write_json(&staged.join("error.json"), &json!({ "error": error }))?;
    eprintln!("partial output left in {}", staged.path().display());
    Ok(())
}

#[derive(Serialize)]
struct ValidationLine {
    line: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    schema_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<ValidationReport>,
}

fn validate_cmd(ctx: &Ctx, a: &ValidateArgs) -> Result<Summary, CliError> {
    let path = if a.corpus.is_dir() { a.corpus.join(corpus::CORPUS_FILE) } else { a.corpus.clone() };
    let text = fs::read_to_string(&path).map_err(io(&path))?;
    let mut lines = Vec::new();
    let mut by_stage: BTreeMap<&str, usize> =
        ["schema", "start_consistency", "medical_plausibility", "narrative_consistency"].iter().map(|k| (*k, 0)).collect();
    let mut passed = 0;
    for (i, raw) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let value: Result<Value, _> = serde_json::from_str(raw);
        let outcome = match value {
            Err(e) => Err(e.to_string()),
            Ok(v) if v.get("id").is_some() => serde_json::from_value::<SynStartsCase>(v)
                .map(|c| validate(&c))
                .map_err(|e| e.to_string()),
            Ok(v) => validate_value(&v).map_err(|e| e.to_string()),
        };
        match outcome {
            Ok(report) => {
                match report.first_failed_stage() {
                    None => passed += 1,
                    Some(1) => *by_stage.get_mut("start_consistency").expect("key") += 1,
                    Some(2) => *by_stage.get_mut("medical_plausibility").expect("key") += 1,
                    Some(_) => *by_stage.get_mut("narrative_consistency").expect("key") += 1,
                }
                lines.push(ValidationLine { line: i + 1, schema_error: None, report: Some(report) });
            }
            Err(e) => {
                *by_stage.get_mut("schema").expect("key") += 1;
                lines.push(ValidationLine { line: i + 1, schema_error: Some(e), report: None });
            }
        }
    }
    let total = lines.len();
    if total == 0 {
        return Err(CliError::Data(format!("{}: no cases", path.display())));
    }
    let failed = total - passed;
    let rate = passed as f64 / total as f64;
    let json = json!({
        "command": "validate",
        "corpus": path,
        "total": total,
        "passed": passed,
        "failed": failed,
        "pass_rate": rate,
        "first_failed_stage": by_stage,
    });
    if let Some(out) = &a.out {
        let staged = StagedDir::create(out)?;
        corpus::write_jsonl(&staged.join("reports.jsonl"), &lines)?;
        corpus::write_json(&staged.join("summary.json"), &json)?;
        corpus::write_json(&staged.join(corpus::CONFIG_FILE), &ctx.snapshot("validate", a, &[]))?;
        staged.commit()?;
    }
    let text = format!("{passed}/{total} cases pass all three stages ({:.1}%)", rate * 100.0);
    Ok(Summary { text, json, exit_code: if failed == 0 { EXIT_OK } else { EXIT_DATA } })
}

fn parse_counts(raw: &str) -> Result<[usize; 4], CliError> {
    let parts: Vec<usize> = raw
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("--counts: {e}")))?;
    parts.try_into().map_err(|_| CliError::Usage("--counts needs four values G,Y,R,B".into()))
}

fn sample_cmd(ctx: &Ctx, a: &SampleArgs) -> Result<Summary, CliError> {
    let distribution = match a.dist {
        Dist::Matched => TagDistribution::matched(),
        Dist::Uniform => {
            TagDistribution::uniform(a.n.ok_or_else(|| CliError::Usage("--dist uniform requires --n".into()))?)?
        }
        Dist::Custom => TagDistribution::from_array(parse_counts(
            a.counts.as_deref().ok_or_else(|| CliError::Usage("--dist custom requires --counts".into()))?,
        )?),
    };
    let corpus = Corpus::load_dir(&a.corpus)?;
    let seed = ctx.module_seed("sample");
    let config = SamplingConfig { replicates: a.replicates, ..SamplingConfig::new(distribution, seed) };
    let manifests = sample_replicates(&corpus, &config)?;
    let staged = StagedDir::create(&a.out)?;
    for m in &manifests {
        m.save(staged.path())?;
    }
    corpus::write_json(
        &staged.join(corpus::CONFIG_FILE),
        &ctx.snapshot("sample", &json!({"cli": a, "sampling": config}), &[("sample", seed)]),
    )?;
    staged.commit()?;
    let text = format!(
        "wrote {} manifests ({} n={} {}) to {}",
        manifests.len(),
        config.config_id,
        config.distribution.n,
        config.distribution.display(),
        a.out.display()
    );
    Ok(Summary::ok(
        text,
        json!({
            "command": "sample",
            "config_id": config.config_id,
            "manifests": manifests.iter().map(|m| m.manifest_id()).collect::<Vec<_>>(),
            "distribution": config.distribution,
            "out": a.out,
        }),
    ))
}

fn manifest_paths(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(io(p))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|e| e == "json"))
                .filter(|f| f.file_name().and_then(|n| n.to_str()).is_some_and(|n| !n.starts_with("config")))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// Write a file through a temporary sibling so readers never see a torn file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes).map_err(io(&tmp))?;
    fs::rename(&tmp, path).map_err(io(path))
}

fn save_run(dir: &Path, run: &RunResult) -> Result<(), CliError> {
    let stem = format!("{}__{}", evaluation::sanitize(&run.model_id), run.manifest_id);
    let mut json = serde_json::to_vec_pretty(run).expect("serializable");
    json.push(b'\n');
    let mut records = Vec::new();
    for r in &run.records {
        serde_json::to_writer(&mut records, r).expect("serializable");
        records.push(b'\n');
    }
    write_atomic(&dir.join(format!("{stem}.records.jsonl")), &records)?;
    write_atomic(&dir.join(format!("{stem}.json")), &json)
}

fn evaluate_cmd(ctx: &Ctx, a: &EvaluateArgs) -> Result<Summary, CliError> {
    // Datasets: (manifest id, items)
    let mut datasets: Vec<(String, Vec<EvalItem>)> = Vec::new();
    let corpus = a.corpus.as_ref().map(|p| Corpus::load_dir(p)).transpose()?;
    if let Some(ext) = &a.external {
        let ds = load_triage_adult(ext, MismatchPolicy::Warn)?;
        datasets.push((EXTERNAL_MANIFEST_ID.to_string(), items_for_external(&ds)));
    }
    let paths = manifest_paths(&a.manifest)?;
    if !paths.is_empty() {
        let corpus = corpus.as_ref().ok_or_else(|| CliError::Usage("--manifest requires --corpus".into()))?;
        for p in &paths {
            let m = DatasetManifest::load(p)?;
            datasets.push((m.manifest_id(), items_for_manifest(corpus, &m)?));
        }
    }
    if datasets.is_empty() {
        return Err(CliError::Usage("nothing to evaluate: give --manifest and/or --external".into()));
    }

    let noisy_seed = ctx.module_seed(&format!("evaluate:{}", a.model));
    let choice = BackendSpec {
        name: &a.backend,
        cassette: a.cassette.as_ref(),
        record: a.record.as_ref(),
        retries: a.retries,
        rps: a.rps,
    };
    let backend = match a.backend.as_str() {
        "mock-oracle" => {
            if a.external.is_some() {
                return Err(CliError::Usage("mock-oracle reads vitals; external cases have none".into()));
            }
            let corpus = corpus.as_ref().ok_or_else(|| CliError::Usage("mock-oracle requires --corpus".into()))?;
            backend::wrap_scripted(Box::new(ScriptedResponder::oracle_for(corpus)), &choice)?
        }
        "mock-constant" => {
            let action = ActionLabel::normalize(&a.constant)
                .ok_or_else(|| CliError::Usage(format!("--constant: unknown action {:?}", a.constant)))?;
            backend::wrap_scripted(Box::new(ScriptedResponder::Constant(action)), &choice)?
        }
        "mock-noisy" => {
            let truth = datasets.iter().flat_map(|(_, items)| items.iter().map(|i| (i.case_id.as_str(), i.truth)));
            backend::wrap_scripted(Box::new(ScriptedResponder::noisy_for(truth, a.accuracy, noisy_seed)), &choice)?
        }
        _ => backend::evaluation_backend(&choice)?,
    };
    let config = EvaluationConfig {
        model_id: a.model.clone(),
        temperature: a.temperature,
        max_tokens: a.max_tokens,
        workers: ctx.workers,
    };
    let snapshot = ctx.snapshot(
        "evaluate",
        &json!({"cli": a, "evaluation": config}),
        &[(&format!("evaluate:{}", a.model), noisy_seed)],
    );

    let mut runs = Vec::with_capacity(datasets.len());
    for (manifest_id, items) in &datasets {
        match evaluate(manifest_id, items, backend.as_ref(), &config) {
            Ok(run) => runs.push(run),
            Err(e) => {
                let staged = StagedDir::create(&a.out)?;
                for run in &runs {
                    save_run(staged.path(), run)?;
                }
                corpus::write_json(&staged.join(corpus::CONFIG_FILE), &snapshot)?;
                corpus::write_json(&staged.join("error.json"), &json!({"error": e.to_string()}))?;
                eprintln!("partial output left in {}", staged.path().display());
                return Err(e.into());
            }
        }
    }
    fs::create_dir_all(&a.out).map_err(io(&a.out))?;
    for run in &runs {
        save_run(&a.out, run)?;
    }
    let mut snap = serde_json::to_vec_pretty(&snapshot).expect("serializable");
    snap.push(b'\n');
    write_atomic(&a.out.join(format!("config__{}.json", evaluation::sanitize(&a.model))), &snap)?;

    let rows: Vec<Value> = runs
        .iter()
        .map(|r| json!({"manifest_id": r.manifest_id, "n": r.n, "correct": r.correct, "accuracy": r.accuracy}))
        .collect();
    let mean = stats::mean(&runs.iter().map(|r| r.accuracy).collect::<Vec<_>>());
    let text = runs
        .iter()
        .map(|r| format!("{} {}: {}/{} = {:.4}", a.model, r.manifest_id, r.correct, r.n, r.accuracy))
        .chain(std::iter::once(format!("mean accuracy over {} run(s): {mean:.4}", runs.len())))
        .collect::<Vec<_>>()
        .join("\n");
    Ok(Summary::ok(text, json!({"command": "evaluate", "model": a.model, "runs": rows, "mean_accuracy": mean})))
}

/// Configuration id of a run: its manifest id without the replicate suffix.
pub fn config_of(manifest_id: &str) -> &str {
    match manifest_id.rsplit_once("-r") {
        Some((head, tail)) if !tail.is_empty() && tail.chars().all(|c| c.is_ascii_digit()) => head,
        _ => manifest_id,
    }
}

fn runs_for(runs: &[RunResult], config: &str) -> Vec<RunResult> {
    runs.iter().filter(|r| config_of(&r.manifest_id) == config).cloned().collect::<Vec<_>>()
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(io(&path))
}

fn analyze_cmd(ctx: &Ctx, a: &AnalyzeArgs) -> Result<Summary, CliError> {
    let load = || -> Result<Vec<RunResult>, CliError> {
        let dir = a.runs.as_ref().ok_or_else(|| CliError::Usage("this report needs --runs DIR".into()))?;
        Ok(evaluation::load_runs(dir)?)
    };
    let staged = StagedDir::create(&a.out)?;
    let out = staged.path().to_path_buf();
    let (text, json) = match a.report {
        Report::Fidelity => {
            let runs = load()?;
            let report = stats::fidelity_report(
                &runs_for(&runs, EXTERNAL_MANIFEST_ID),
                &runs_for(&runs, &a.matched_config),
            )?;
            corpus::write_json(&out.join("fidelity.json"), &report)?;
            write_text(&out, "table_fidelity.csv", &stats::fidelity_csv(&report))?;
            write_text(&out, "scatter.csv", &stats::fidelity_scatter_csv(&report))?;
            let p = report.pearson.p_value.unwrap_or(f64::NAN);
            (
                format!("pearson r = {:.4}, p = {:.4} over {} models", report.pearson.statistic, p, report.rows.len()),
                json!({"command": "analyze", "report": "fidelity", "r": report.pearson.statistic, "p_value": p, "models": report.rows.len()}),
            )
        }
        Report::Distribution => {
            let runs = load()?;
            let rows = stats::distribution_report(&runs_for(&runs, &a.config_a), &runs_for(&runs, &a.config_b))?;
            if rows.is_empty() {
                return Err(CliError::Data(format!("no runs for {} / {}", a.config_a, a.config_b)));
            }
            corpus::write_json(&out.join("distribution.json"), &rows)?;
            write_text(&out, "table_distribution.csv", &stats::distribution_csv(&rows))?;
            (stats::distribution_csv(&rows), json!({"command": "analyze", "report": "distribution", "rows": rows}))
        }
        Report::Scale => {
            let runs: Vec<RunResult> =
                load()?.into_iter().filter(|r| config_of(&r.manifest_id).starts_with(&a.scale_prefix)).collect();
            if runs.is_empty() {
                return Err(CliError::Data(format!("no runs with configuration prefix {}", a.scale_prefix)));
            }
            let curve = stats::scale_variance(&runs)?;
            corpus::write_json(&out.join("scale.json"), &curve)?;
            write_text(&out, "table_scale.csv", &stats::scale_csv(&curve))?;
            write_text(&out, "scale_per_tag.csv", &stats::scale_per_tag_csv(&curve))?;
            (stats::scale_csv(&curve), json!({"command": "analyze", "report": "scale", "curve": curve}))
        }
        Report::Confusion => {
            let runs = runs_for(&load()?, &a.confusion_config);
            let mut by_model: BTreeMap<String, Vec<RunResult>> = BTreeMap::new();
            for r in runs {
                by_model.entry(r.model_id.clone()).or_default().push(r);
            }
            if by_model.is_empty() {
                return Err(CliError::Data(format!("no runs for {}", a.confusion_config)));
            }
            let mut all = serde_json::Map::new();
            for (model, rs) in &by_model {
                let m = average_confusions(rs)?;
                write_text(&out, &format!("confusion_{}.csv", evaluation::sanitize(model)), &stats::confusion_csv(&m))?;
                all.insert(model.clone(), json!(m));
            }
            corpus::write_json(&out.join("confusion.json"), &all)?;
            (
                format!("averaged confusion matrices for {} model(s)", by_model.len()),
                json!({"command": "analyze", "report": "confusion", "matrices": all}),
            )
        }
        Report::Linguistics => linguistics(a, &out)?,
    };
    corpus::write_json(&out.join(corpus::CONFIG_FILE), &ctx.snapshot("analyze", a, &[]))?;
    staged.commit()?;
    Ok(Summary::ok(text, json))
}

fn linguistics(a: &AnalyzeArgs, out: &Path) -> Result<(String, Value), CliError> {
    let mut result = serde_json::Map::new();
    let mut lines = Vec::new();
    result.insert("tokenizer".into(), json!(stats::TOKENIZER_VERSION));
    if let Some(ext) = &a.external {
        let ds = load_triage_adult(ext, MismatchPolicy::Warn)?;
        let texts: Vec<&str> = ds.cases.iter().map(|c| c.description.as_str()).collect();
        let f = stats::linguistic_features(&texts);
        write_text(out, "histogram_external.csv", &stats::histogram_csv(&f))?;
        lines.push(format!(
            "external: avg length {:.2}, vocabulary {} (n={})",
            f.avg_narrative_length, f.vocabulary_size, f.n
        ));
        result.insert("external".into(), json!(f));
    }
    if let (Some(corpus), Some(manifests)) = (&a.corpus, &a.manifests) {
        let corpus = Corpus::load_dir(corpus)?;
        let index = corpus.index();
        let mut datasets = Vec::new();
        for p in manifest_paths(std::slice::from_ref(manifests))? {
            let m = DatasetManifest::load(&p)?;
            let texts = m
                .case_ids
                .iter()
                .map(|id| {
                    index
                        .get(id.as_str())
                        .map(|c| c.description.clone())
                        .ok_or_else(|| CliError::Data(format!("{}: unknown case {id}", p.display())))
                })
                .collect::<Result<Vec<_>, _>>()?;
            datasets.push(texts);
        }
        if datasets.is_empty() {
            return Err(CliError::Data(format!("{}: no manifests", manifests.display())));
        }
        let summary = stats::linguistic_summary(&datasets);
        for (i, f) in summary.datasets.iter().enumerate() {
            write_text(out, &format!("histogram_synthetic_r{i:02}.csv"), &stats::histogram_csv(f))?;
        }
        lines.push(format!(
            "synthetic: avg length {}, vocabulary {:.2} ± {:.2} over {} datasets",
            stats::fmt_pm(&summary.avg_narrative_length),
            summary.vocabulary_size.mean,
            summary.vocabulary_size.std,
            summary.datasets.len()
        ));
        result.insert("synthetic".into(), json!(summary));
    }
    if lines.is_empty() {
        return Err(CliError::Usage("linguistics needs --external FILE and/or --corpus DIR --manifests DIR".into()));
    }
    corpus::write_json(&out.join("linguistics.json"), &result)?;
    result.insert("command".into(), json!("analyze"));
    result.insert("report".into(), json!("linguistics"));
    Ok((lines.join("\n"), Value::Object(result)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn config_ids_strip_replicate_suffix() {
        assert_eq!(config_of("uniform-n200-r07"), "uniform-n200");
        assert_eq!(config_of("matched-n54-r00"), "matched-n54");
        assert_eq!(config_of(EXTERNAL_MANIFEST_ID), EXTERNAL_MANIFEST_ID);
        assert_eq!(config_of("custom-r"), "custom-r");
    }

    #[test]
    fn config_values_are_spliced_after_the_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"per_tag": 3, "record": null, "manifest": ["a", "b"], "same_pairs": true}"#).unwrap();
        let argv = s(&["synstarts", "--config", cfg.to_str().unwrap(), "evaluate", "--per-tag", "9"]);
        let out = expand_config(argv).unwrap();
        assert_eq!(&out[3..], &s(&["evaluate", "--manifest", "a", "--manifest", "b", "--same-pairs", "--per-tag", "9"])[..]);
    }

    #[test]
    fn counts_need_four_values() {
        assert_eq!(parse_counts("18,11,22,3").unwrap(), [18, 11, 22, 3]);
        assert!(parse_counts("1,2,3").is_err());
        assert!(parse_counts("a,b,c,d").is_err());
    }
}
