use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use super::{ChatBackend, ChatRequest, ChatResponse, GatewayError};

/// Exponential backoff for transient failures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub multiplier: f64,
    pub max_backoff: Duration,
    /// Upper bound on the total time spent sleeping across retries.
    pub ceiling: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 5,
            initial_backoff: Duration::from_millis(500),
            multiplier: 2.0,
            max_backoff: Duration::from_secs(20),
            ceiling: Duration::from_secs(60),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        RetryPolicy { max_retries: 0, ..Default::default() }
    }

    /// Backoff before retry number `attempt` (0-based).
    pub fn backoff(&self, attempt: u32) -> Duration {
        let scaled = self.initial_backoff.as_secs_f64() * self.multiplier.powi(attempt as i32);
        Duration::from_secs_f64(scaled.min(self.max_backoff.as_secs_f64()))
    }
}

/// Retries transient backend errors according to a [`RetryPolicy`].
pub struct Retrying<B> {
    inner: B,
    policy: RetryPolicy,
    retries: AtomicU64,
}

impl<B: ChatBackend> Retrying<B> {
    pub fn new(inner: B, policy: RetryPolicy) -> Self {
        Retrying { inner, policy, retries: AtomicU64::new(0) }
    }

    /// Total retries performed so far across all requests.
    pub fn retries(&self) -> u64 {
        self.retries.load(Ordering::Relaxed)
    }
}

impl<B: ChatBackend> ChatBackend for Retrying<B> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let mut slept = Duration::ZERO;
        let mut attempt = 0u32;
        loop {
            match self.inner.complete(req) {
                Err(err) if err.is_transient() => {
                    let wait = self.policy.backoff(attempt);
                    if attempt >= self.policy.max_retries || slept + wait > self.policy.ceiling {
                        log::warn!(
                            "{}: giving up on {} after {attempt} retries: {err}",
                            self.inner.id(),
                            req.request_tag
                        );
                        return Err(match err {
                            GatewayError::RateLimited { .. } => GatewayError::RateLimited { retries: attempt },
                            other => other,
                        });
                    }
                    log::warn!(
                        "{}: retry {} for {} in {:?}: {err}",
                        self.inner.id(),
                        attempt + 1,
                        req.request_tag,
                        wait
                    );
                    thread::sleep(wait);
                    slept += wait;
                    attempt += 1;
                    self.retries.fetch_add(1, Ordering::Relaxed);
                }
                other => return other,
            }
        }
    }
}

/// Enforces a minimum interval between request starts.
pub struct Throttled<B> {
    inner: B,
    min_interval: Duration,
    next_slot: Mutex<Option<Instant>>,
}

impl<B: ChatBackend> Throttled<B> {
    pub fn new(inner: B, requests_per_second: f64) -> Self {
        let min_interval = if requests_per_second > 0.0 {
            Duration::from_secs_f64(1.0 / requests_per_second)
        } else {
            Duration::ZERO
        };
        Throttled { inner, min_interval, next_slot: Mutex::new(None) }
    }
}

impl<B: ChatBackend> ChatBackend for Throttled<B> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let wait = {
            let mut slot = self.next_slot.lock().expect("throttle lock");
            let now = Instant::now();
            let start = slot.map_or(now, |s| s.max(now));
            *slot = Some(start + self.min_interval);
            start - now
        };
        if !wait.is_zero() {
            thread::sleep(wait);
        }
        self.inner.complete(req)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicU32;

    struct Flaky {
        failures: u32,
        calls: AtomicU32,
        rate_limit: bool,
    }

    impl ChatBackend for Flaky {
        fn id(&self) -> &str {
            "flaky"
        }

        fn complete(&self, _req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                if self.rate_limit {
                    Err(GatewayError::RateLimited { retries: 0 })
                } else {
                    Err(GatewayError::BackendUnavailable("503".into()))
                }
            } else {
                Ok(ChatResponse {
                    text: "ok".into(),
                    latency: Duration::ZERO,
                    token_usage: None,
                    backend: "flaky".into(),
                })
            }
        }
    }

    fn req() -> ChatRequest {
        ChatRequest {
            model_id: "m".into(),
            system_prompt: "s".into(),
            user_prompt: "u".into(),
            temperature: 0.0,
            max_tokens: 8,
            request_tag: "t".into(),
        }
    }

    fn fast_policy(max_retries: u32) -> RetryPolicy {
        RetryPolicy {
            max_retries,
            initial_backoff: Duration::from_millis(1),
            multiplier: 2.0,
            max_backoff: Duration::from_millis(4),
            ceiling: Duration::from_millis(50),
        }
    }

    #[test]
    fn recovers_from_transient_failures() {
        let backend = Retrying::new(
            Flaky { failures: 3, calls: AtomicU32::new(0), rate_limit: false },
            fast_policy(5),
        );
        assert_eq!(backend.complete(&req()).unwrap().text, "ok");
        assert_eq!(backend.retries(), 3);
    }

    #[test]
    fn rate_limit_reports_retry_count() {
        let backend = Retrying::new(
            Flaky { failures: 100, calls: AtomicU32::new(0), rate_limit: true },
            fast_policy(3),
        );
        match backend.complete(&req()) {
            Err(GatewayError::RateLimited { retries }) => assert_eq!(retries, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn total_backoff_respects_ceiling() {
        let mut policy = fast_policy(1000);
        policy.initial_backoff = Duration::from_millis(10);
        policy.max_backoff = Duration::from_millis(10);
        policy.ceiling = Duration::from_millis(35);
        let backend =
            Retrying::new(Flaky { failures: 1000, calls: AtomicU32::new(0), rate_limit: false }, policy);
        let start = Instant::now();
        assert!(backend.complete(&req()).is_err());
        assert_eq!(backend.retries(), 3);
        assert!(start.elapsed() < Duration::from_millis(500));
    }

    #[test]
    fn backoff_grows_and_caps() {
        let policy = fast_policy(5);
        assert_eq!(policy.backoff(0), Duration::from_millis(1));
        assert_eq!(policy.backoff(1), Duration::from_millis(2));
        assert_eq!(policy.backoff(5), Duration::from_millis(4));
    }

    #[test]
    fn throttle_spaces_requests() {
        let backend =
            Throttled::new(Flaky { failures: 0, calls: AtomicU32::new(0), rate_limit: false }, 100.0);
        let start = Instant::now();
        for _ in 0..4 {
            backend.complete(&req()).unwrap();
        }
        assert!(start.elapsed() >= Duration::from_millis(29));
    }
}
