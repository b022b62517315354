//! Backend selection from command-line settings.

use std::path::PathBuf;

use synstarts_core::gateway::{
    AnthropicBackend, ChatBackend, MockBackend, MockConfig, OpenAiCompatibleBackend, Recorder, ReplayBackend,
    RetryPolicy, Retrying, Throttled,
};

use crate::CliError;

/// Names accepted by `--backend` besides an OpenAI-compatible provider id.
pub const BUILTIN: [&str; 6] = ["mock", "mock-oracle", "mock-constant", "mock-noisy", "replay", "anthropic"];

pub struct BackendSpec<'a> {
    pub name: &'a str,
    pub cassette: Option<&'a PathBuf>,
    pub record: Option<&'a PathBuf>,
    pub retries: u32,
    pub rps: Option<f64>,
}

/// Wrap a base backend with retry, throttling and recording as requested.
fn decorate(base: Box<dyn ChatBackend>, choice: &BackendSpec<'_>, live: bool) -> Result<Box<dyn ChatBackend>, CliError> {
    let mut backend = base;
    if live {
        backend = Box::new(Retrying::new(backend, RetryPolicy { max_retries: choice.retries, ..Default::default() }));
        if let Some(rps) = choice.rps {
            backend = Box::new(Throttled::new(backend, rps));
        }
    }
    if let Some(path) = choice.record {
        backend = Box::new(Recorder::create(backend, path).map_err(CliError::backend)?);
    }
    Ok(backend)
}

fn replay(choice: &BackendSpec<'_>) -> Result<Box<dyn ChatBackend>, CliError> {
    let path = choice.cassette.ok_or_else(|| CliError::Usage("--backend replay requires --cassette FILE".into()))?;
    Ok(Box::new(ReplayBackend::open(path).map_err(|e| CliError::Data(e.to_string()))?))
}

/// A provider reached over HTTP. `openai` and any unrecognised name use the
/// OpenAI wire format (`SYNSTARTS_BASE_URL` selects the server).
fn live(name: &str) -> Box<dyn ChatBackend> {
    match name {
        "anthropic" => Box::new(AnthropicBackend::from_env()),
        other => Box::new(OpenAiCompatibleBackend::from_env(other)),
    }
}

pub fn generation_backend(choice: &BackendSpec<'_>, mock: MockConfig) -> Result<Box<dyn ChatBackend>, CliError> {
    match choice.name {
        "mock" => decorate(Box::new(MockBackend::new(mock)), choice, false),
        "replay" => decorate(replay(choice)?, choice, false),
        "mock-oracle" | "mock-constant" | "mock-noisy" => {
            Err(CliError::Usage(format!("{} is an evaluation responder, not a generator", choice.name)))
        }
        name => decorate(live(name), choice, true),
    }
}

/// Evaluation backends other than the scripted responders.
pub fn evaluation_backend(choice: &BackendSpec<'_>) -> Result<Box<dyn ChatBackend>, CliError> {
    match choice.name {
        "replay" => decorate(replay(choice)?, choice, false),
        "mock" => Err(CliError::Usage("use mock-oracle, mock-constant or mock-noisy for evaluation".into())),
        name => decorate(live(name), choice, true),
    }
}

pub fn wrap_scripted(base: Box<dyn ChatBackend>, choice: &BackendSpec<'_>) -> Result<Box<dyn ChatBackend>, CliError> {
    decorate(base, choice, false)
}
