//! HTTP providers. Credentials come from the environment.

use std::time::{Duration, Instant};

use serde_json::{json, Value};
use ureq::Agent;

use super::{ChatBackend, ChatRequest, ChatResponse, GatewayError, TokenUsage};

fn agent(timeout: Duration) -> Agent {
    Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

fn classify_status(status: u16, body: &str) -> Option<GatewayError> {
    match status {
        200..=299 => None,
        401 | 403 => Some(GatewayError::AuthError(format!("HTTP {status}: {body}"))),
        429 => Some(GatewayError::RateLimited { retries: 0 }),
        500..=599 | 408 => Some(GatewayError::BackendUnavailable(format!("HTTP {status}: {body}"))),
        _ => Some(GatewayError::InvalidRequest(format!("HTTP {status}: {body}"))),
    }
}

fn transport(err: ureq::Error) -> GatewayError {
    GatewayError::BackendUnavailable(err.to_string())
}

fn env_key(vars: &[&str]) -> Option<String> {
    vars.iter().find_map(|v| std::env::var(v).ok().filter(|s| !s.trim().is_empty()))
}

/// `POST {base_url}/chat/completions` in the OpenAI wire format.
/// Covers OpenAI, Mistral, Together, vLLM and similar servers.
pub struct OpenAiCompatibleBackend {
    id: String,
    base_url: String,
    api_key: Option<String>,
    agent: Agent,
}

impl OpenAiCompatibleBackend {
    pub fn new(id: impl Into<String>, base_url: impl Into<String>, api_key: Option<String>) -> Self {
        OpenAiCompatibleBackend {
            id: id.into(),
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            agent: agent(Duration::from_secs(120)),
        }
    }

    /// Reads `SYNSTARTS_BASE_URL` (default OpenAI) and `SYNSTARTS_API_KEY`
    /// or `OPENAI_API_KEY`.
    pub fn from_env(id: impl Into<String>) -> Self {
        let base = std::env::var("SYNSTARTS_BASE_URL").unwrap_or_else(|_| "https://api.openai.com/v1".into());
        Self::new(id, base, env_key(&["SYNSTARTS_API_KEY", "OPENAI_API_KEY"]))
    }
}

impl ChatBackend for OpenAiCompatibleBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        req.check()?;
        let key = self
            .api_key
            .as_deref()
            .ok_or_else(|| GatewayError::AuthError("no API key configured".into()))?;
        let body = json!({
            "model": req.model_id,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
            "messages": [
                {"role": "system", "content": req.system_prompt},
                {"role": "user", "content": req.user_prompt},
            ],
        });
        let started = Instant::now();
        let mut resp = self
            .agent
            .post(format!("{}/chat/completions", self.base_url))
            .header("Authorization", format!("Bearer {key}"))
            .send_json(&body)
            .map_err(transport)?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(transport)?;
        if let Some(err) = classify_status(status, &text) {
            return Err(err);
        }
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| GatewayError::BackendUnavailable(format!("malformed response: {e}")))?;
        let content = value["choices"][0]["message"]["content"].as_str().unwrap_or_default().to_string();
        let token_usage = value.get("usage").map(|u| TokenUsage {
            prompt_tokens: u["prompt_tokens"].as_u64().unwrap_or(0),
            completion_tokens: u["completion_tokens"].as_u64().unwrap_or(0),
        });
        Ok(ChatResponse { text: content, latency: started.elapsed(), token_usage, backend: self.id.clone() })
    }
}

/// Anthropic Messages API.
pub struct AnthropicBackend {
    base_url: String,
    api_key: Option<String>,
    agent: Agent,
}

impl AnthropicBackend {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>) -> Self {
        AnthropicBackend {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            agent: agent(Duration::from_secs(120)),
        }
    }

    pub fn from_env() -> Self {
        let base = std::env::var("ANTHROPIC_BASE_URL").unwrap_or_else(|_| "https://api.anthropic.com".into());
        Self::new(base, env_key(&["ANTHROPIC_API_KEY"]))
    }
}

impl ChatBackend for AnthropicBackend {
    fn id(&self) -> &str {
        "anthropic"
    }

    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        req.check()?;
        let key = self
            .api_key
            .as_deref()
            .ok_or_else(|| GatewayError::AuthError("ANTHROPIC_API_KEY is not set".into()))?;
        let body = json!({
            "model": req.model_id,
            "max_tokens": req.max_tokens,
            "temperature": req.temperature,
            "system": req.system_prompt,
            "messages": [{"role": "user", "content": req.user_prompt}],
        });
        let started = Instant::now();
        let mut resp = self
            .agent
            .post(format!("{}/v1/messages", self.base_url))
            .header("x-api-key", key)
            .header("anthropic-version", "2023-06-01")
            .send_json(&body)
            .map_err(transport)?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(transport)?;
        if let Some(err) = classify_status(status, &text) {
            return Err(err);
        }
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| GatewayError::BackendUnavailable(format!("malformed response: {e}")))?;
        let content = value["content"]
            .as_array()
            .map(|blocks| {
                blocks.iter().filter_map(|b| b["text"].as_str()).collect::<Vec<_>>().join("")
            })
            .unwrap_or_default();
        let token_usage = value.get("usage").map(|u| TokenUsage {
            prompt_tokens: u["input_tokens"].as_u64().unwrap_or(0),
            completion_tokens: u["output_tokens"].as_u64().unwrap_or(0),
        });
        Ok(ChatResponse { text: content, latency: started.elapsed(), token_usage, backend: "anthropic".into() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::thread;

    /// One-shot HTTP server answering every connection with `status` and `body`.
    fn serve(status: u16, body: &'static str, connections: usize) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        thread::spawn(move || {
            for stream in listener.incoming().take(connections) {
                let mut stream = stream.unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut content_length = 0usize;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        content_length = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; content_length];
                reader.read_exact(&mut buf).unwrap();
                let reply = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(reply.as_bytes()).unwrap();
            }
        });
        format!("http://{addr}")
    }

    fn req() -> ChatRequest {
        ChatRequest {
            model_id: "gpt-test".into(),
            system_prompt: "s".into(),
            user_prompt: "u".into(),
            temperature: 0.0,
            max_tokens: 16,
            request_tag: "t".into(),
        }
    }

    #[test]
    fn invalid_credentials_are_auth_errors() {
        let base = serve(401, r#"{"error":"bad key"}"#, 1);
        let backend = OpenAiCompatibleBackend::new("openai", base, Some("sk-bad".into()));
        assert!(matches!(backend.complete(&req()), Err(GatewayError::AuthError(_))));
    }

    #[test]
    fn missing_key_is_auth_error() {
        let backend = OpenAiCompatibleBackend::new("openai", "http://127.0.0.1:9", None);
        assert!(matches!(backend.complete(&req()), Err(GatewayError::AuthError(_))));
        let backend = AnthropicBackend::new("http://127.0.0.1:9", None);
        assert!(matches!(backend.complete(&req()), Err(GatewayError::AuthError(_))));
    }

    #[test]
    fn parses_openai_completion() {
        let base = serve(
            200,
            r#"{"choices":[{"message":{"content":"{\"action\":\"MINOR\"}"}}],"usage":{"prompt_tokens":5,"completion_tokens":3}}"#,
            1,
        );
        let backend = OpenAiCompatibleBackend::new("openai", base, Some("sk".into()));
        let resp = backend.complete(&req()).unwrap();
        assert_eq!(resp.text, r#"{"action":"MINOR"}"#);
        assert_eq!(resp.token_usage, Some(TokenUsage { prompt_tokens: 5, completion_tokens: 3 }));
    }

    #[test]
    fn parses_anthropic_completion() {
        let base = serve(200, r#"{"content":[{"type":"text","text":"hi"}],"usage":{"input_tokens":2,"output_tokens":1}}"#, 1);
        let backend = AnthropicBackend::new(base, Some("k".into()));
        assert_eq!(backend.complete(&req()).unwrap().text, "hi");
    }

    #[test]
    fn server_errors_and_throttling_are_transient() {
        let base = serve(429, "{}", 1);
        let backend = OpenAiCompatibleBackend::new("openai", base, Some("sk".into()));
        let err = backend.complete(&req()).unwrap_err();
        assert!(err.is_transient());
        let base = serve(503, "{}", 1);
        let backend = OpenAiCompatibleBackend::new("openai", base, Some("sk".into()));
        assert!(matches!(backend.complete(&req()), Err(GatewayError::BackendUnavailable(_))));
    }
}
