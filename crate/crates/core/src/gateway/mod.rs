//! Chat-completion backends: live providers, a deterministic mock, and
//! cassette record/replay, behind one [`ChatBackend`] trait.

mod cassette;
mod live;
mod mock;
mod retry;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cassette::{Cassette, CassetteRecord, Recorder, ReplayBackend};
pub use live::{AnthropicBackend, OpenAiCompatibleBackend};
pub use mock::{mock_generate, DefectKind, MockBackend, MockConfig};
pub use retry::{RetryPolicy, Retrying, Throttled};

/// Default sampling temperature for generation runs.
pub const DEFAULT_GENERATION_TEMPERATURE: f64 = 0.7;
pub const DEFAULT_GENERATION_MAX_TOKENS: u32 = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub system_prompt: String,
    pub user_prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Correlation id, e.g. `gen:Red:17` or `eval:<case id>`. Not part of
    /// the cassette digest.
    pub request_tag: String,
}

impl ChatRequest {
    pub fn check(&self) -> Result<(), GatewayError> {
        if self.system_prompt.trim().is_empty() || self.user_prompt.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("prompts must be non-empty".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(GatewayError::InvalidRequest("temperature must be >= 0".into()));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }

    /// Replay key: hash of everything that determines the completion,
    /// excluding the correlation tag.
    pub fn digest(&self) -> String {
        let canonical = serde_json::json!([
            self.model_id,
            self.system_prompt,
            self.user_prompt,
            self.temperature,
            self.max_tokens
        ]);
        hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    #[serde(with = "millis")]
    pub latency: Duration,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_usage: Option<TokenUsage>,
    pub backend: String,
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("rate limited after {retries} retries")]
    RateLimited { retries: u32 },
    #[error("authentication failed: {0}")]
    AuthError(String),
    #[error("request {digest} not found in cassette")]
    ReplayMiss { digest: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("cassette i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl GatewayError {
    pub fn is_transient(&self) -> bool {
        matches!(self, GatewayError::BackendUnavailable(_) | GatewayError::RateLimited { .. })
    }
}

pub trait ChatBackend: Send + Sync {
    /// Provider id recorded in responses.
    fn id(&self) -> &str;
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for Box<B> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        (**self).complete(req)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<B> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        (**self).complete(req)
    }
}

/// Derive a child seed from a parent seed and a label.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(label.as_bytes());
    let out = hasher.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req() -> ChatRequest {
        ChatRequest {
            model_id: "m".into(),
            system_prompt: "sys".into(),
            user_prompt: "user".into(),
            temperature: 0.7,
            max_tokens: 512,
            request_tag: "gen:Red:0".into(),
        }
    }

    #[test]
    fn digest_ignores_request_tag() {
        let a = req();
        let mut b = req();
        b.request_tag = "gen:Red:99".into();
        assert_eq!(a.digest(), b.digest());
        b.temperature = 0.0;
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn request_checks() {
        assert!(req().check().is_ok());
        let mut r = req();
        r.user_prompt = " ".into();
        assert!(r.check().is_err());
        let mut r = req();
        r.max_tokens = 0;
        assert!(r.check().is_err());
        let mut r = req();
        r.temperature = -0.1;
        assert!(r.check().is_err());
    }

    #[test]
    fn derived_seeds_differ_by_label() {
        assert_ne!(derive_seed(1, "a"), derive_seed(1, "b"));
        assert_eq!(derive_seed(1, "a"), derive_seed(1, "a"));
    }
}
