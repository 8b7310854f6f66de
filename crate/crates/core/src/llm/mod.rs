//! Chat-completion client with mock, replay and HTTP backends, retries,
//! request-rate limiting, and token/cost accounting.

mod cost;
mod http;
mod mock;
mod replay;

use std::fmt;
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cost::{cost, known_cost_model, CostModel, Usage, PRICE_TABLE};
pub use http::HttpBackend;
pub use mock::{MockBackend, MockReply, MockRule, MockRules};
pub use replay::{exchanges_to_jsonl, ReplayBackend};

/// An API key. Never printed, never serialized.
#[derive(Clone, PartialEq, Eq)]
pub struct Secret(String);

impl Secret {
    pub fn new(value: impl Into<String>) -> Self {
        Self(value.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }

    /// Replaces every occurrence of the secret in `text`.
    pub fn scrub(&self, text: &str) -> String {
        if self.0.is_empty() {
            text.to_string()
        } else {
            text.replace(&self.0, "[redacted]")
        }
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret([redacted])")
    }
}

fn default_temperature() -> f64 {
    0.0
}
fn default_max_output_tokens() -> u32 {
    1024
}
fn default_timeout() -> f64 {
    60.0
}
fn default_retries() -> u32 {
    3
}
fn default_backoff() -> f64 {
    1.0
}
fn default_key_env() -> String {
    "DSREPAIR_API_KEY".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub model_name: String,
    /// Name of the environment variable holding the key.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(skip)]
    pub api_key: Option<Secret>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: u32,
    #[serde(default = "default_timeout")]
    pub request_timeout_s: f64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    /// First retry delay; doubles per attempt.
    #[serde(default = "default_backoff")]
    pub backoff_s: f64,
    #[serde(default)]
    pub requests_per_minute: Option<u32>,
}

impl ProviderConfig {
    pub fn new(endpoint: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model_name: model_name.into(),
            api_key_env: default_key_env(),
            api_key: None,
            temperature: default_temperature(),
            max_output_tokens: default_max_output_tokens(),
            request_timeout_s: default_timeout(),
            retries: default_retries(),
            backoff_s: default_backoff(),
            requests_per_minute: None,
        }
    }

    /// Reads the key from the configured environment variable when not set.
    pub fn with_key_from_env(mut self) -> Self {
        if self.api_key.is_none() {
            self.api_key = std::env::var(&self.api_key_env).ok().filter(|k| !k.is_empty()).map(Secret::new);
        }
        self
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        let bad = |m: String| Err(LlmError::Config(m));
        if !(self.endpoint.starts_with("http://") || self.endpoint.starts_with("https://")) {
            return bad(format!("endpoint `{}` is not an http(s) URL", self.endpoint));
        }
        if self.model_name.trim().is_empty() {
            return bad("model_name is empty".into());
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return bad(format!("temperature {} is outside [0, 2]", self.temperature));
        }
        if self.request_timeout_s.is_nan() || self.request_timeout_s <= 0.0 {
            return bad("request_timeout_s must be positive".into());
        }
        if self.max_output_tokens == 0 {
            return bad("max_output_tokens must be positive".into());
        }
        if self.requests_per_minute == Some(0) {
            return bad("requests_per_minute must be positive".into());
        }
        Ok(())
    }
}

/// One prompt/response round trip. `usage` is `None` when the backend
/// reported no token counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub prompt: String,
    pub response: String,
    #[serde(default)]
    pub usage: Option<Usage>,
    pub latency_s: f64,
    pub provider: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited by provider")]
    RateLimited { retry_after_s: Option<f64> },
    #[error("request timed out after {0:.1}s")]
    Timeout(f64),
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("transient provider failure: {0}")]
    Transient(String),
    #[error("provider rejected the request (HTTP {status}): {message}")]
    Rejected { status: u16, message: String },
    #[error("replay transcript has no further response for prompt {prompt_hash}")]
    Exhausted { prompt_hash: String },
    #[error("no mock rule matches prompt {prompt_hash}")]
    NoRule { prompt_hash: String },
    #[error("invalid provider configuration: {0}")]
    Config(String),
    #[error("empty prompt")]
    EmptyPrompt,
}

impl LlmError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, Self::RateLimited { .. } | Self::Timeout(_) | Self::Transient(_))
    }
}

/// Hex SHA-256 of a prompt, the key of mock rules and replay transcripts.
pub fn prompt_sha256(prompt: &str) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// A source of completions. Implementations must be usable from several
/// threads at once.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<ChatExchange, LlmError>;
}

/// Refills `per_minute` tokens evenly over a minute; bursts up to the same amount.
#[derive(Debug)]
struct TokenBucket {
    capacity: f64,
    per_s: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    fn new(per_minute: u32) -> Self {
        let capacity = f64::from(per_minute);
        Self { capacity, per_s: capacity / 60.0, state: Mutex::new((capacity, Instant::now())) }
    }

    fn acquire(&self) {
        loop {
            let wait = {
                let mut st = self.state.lock().expect("bucket lock");
                let now = Instant::now();
                st.0 = (st.0 + now.duration_since(st.1).as_secs_f64() * self.per_s).min(self.capacity);
                st.1 = now;
                if st.0 >= 1.0 {
                    st.0 -= 1.0;
                    return;
                }
                (1.0 - st.0) / self.per_s
            };
            thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

/// Wraps a backend with retries and rate limiting. Shareable across threads.
pub struct LlmClient {
    backend: Box<dyn ChatBackend>,
    retries: u32,
    backoff_s: f64,
    limiter: Option<TokenBucket>,
}

const MAX_BACKOFF_S: f64 = 30.0;

impl LlmClient {
    pub fn new(backend: Box<dyn ChatBackend>) -> Self {
        Self { backend, retries: 0, backoff_s: 0.0, limiter: None }
    }

    /// Client for a live provider, configured entirely from `cfg`.
    pub fn http(cfg: ProviderConfig) -> Result<Self, LlmError> {
        cfg.validate()?;
        let (retries, backoff, rpm) = (cfg.retries, cfg.backoff_s, cfg.requests_per_minute);
        let client = Self::new(Box::new(HttpBackend::new(cfg)?)).with_retries(retries, backoff);
        Ok(match rpm {
            Some(r) => client.with_rate_limit(r),
            None => client,
        })
    }

    pub fn with_retries(mut self, retries: u32, backoff_s: f64) -> Self {
        self.retries = retries;
        self.backoff_s = backoff_s.max(0.0);
        self
    }

    pub fn with_rate_limit(mut self, requests_per_minute: u32) -> Self {
        self.limiter = (requests_per_minute > 0).then(|| TokenBucket::new(requests_per_minute));
        self
    }

    pub fn complete(&self, prompt: &str) -> Result<ChatExchange, LlmError> {
        if prompt.trim().is_empty() {
            return Err(LlmError::EmptyPrompt);
        }
        let mut attempt = 0;
        loop {
            if let Some(l) = &self.limiter {
                l.acquire();
            }
            match self.backend.complete(prompt) {
                Ok(ex) => return Ok(ex),
                Err(e) if e.is_retryable() && attempt < self.retries => {
                    let mut delay = (self.backoff_s * 2f64.powi(attempt as i32)).min(MAX_BACKOFF_S);
                    if let LlmError::RateLimited { retry_after_s: Some(after) } = e {
                        delay = delay.max(after.min(MAX_BACKOFF_S));
                    }
                    log::warn!("attempt {} failed ({e}); retrying in {delay:.2}s", attempt + 1);
                    thread::sleep(Duration::from_secs_f64(delay));
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}
