//! Chat-completion clients: a live HTTP provider and a deterministic replay
//! provider for tests and offline campaigns.

mod extract;
mod live;
mod replay;

use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::{extract_code, fenced_blocks, looks_like_code};
pub use live::LiveClient;
pub use replay::{ReplayProvider, REPLAY_ERROR_EXTENSION};

use crate::prompt::{Conversation, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provider {
    /// Chat-completions JSON over HTTP.
    Openai,
    /// Pre-recorded responses read from a fixture directory.
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_s: f64,
    #[serde(default = "default_backoff_factor")]
    pub backoff_factor: f64,
}

fn default_backoff_factor() -> f64 {
    2.0
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 3, backoff_s: 1.0, backoff_factor: 2.0 }
    }
}

impl RetryPolicy {
    /// Wait before attempt `attempt + 1`, counting from 1.
    pub fn delay(&self, attempt: u32) -> Duration {
        let s = self.backoff_s * self.backoff_factor.powi(attempt.saturating_sub(1) as i32);
        Duration::from_secs_f64(s.clamp(0.0, 300.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateLimit {
    pub requests_per_minute: f64,
    #[serde(default = "default_burst")]
    pub burst: u32,
}

fn default_burst() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Identifier sent to the provider and used in repository paths.
    pub id: String,
    pub provider: Provider,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the bearer token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_env: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    #[serde(default = "default_request_timeout")]
    pub request_timeout_s: f64,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_limit: Option<RateLimit>,
    /// Fixture root for the replay provider.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay_dir: Option<PathBuf>,
    /// Optional system message placed before the coder prompt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_prompt: Option<String>,
}

fn default_request_timeout() -> f64 {
    120.0
}

impl ModelConfig {
    pub fn replay(id: impl Into<String>, dir: impl Into<PathBuf>) -> Self {
        Self {
            id: id.into(),
            provider: Provider::Replay,
            endpoint: None,
            auth_env: None,
            temperature: None,
            max_tokens: None,
            request_timeout_s: default_request_timeout(),
            retry: RetryPolicy::default(),
            rate_limit: None,
            replay_dir: Some(dir.into()),
            system_prompt: None,
        }
    }

    pub fn openai(id: impl Into<String>, endpoint: impl Into<String>, auth_env: impl Into<String>) -> Self {
        Self {
            provider: Provider::Openai,
            endpoint: Some(endpoint.into()),
            auth_env: Some(auth_env.into()),
            replay_dir: None,
            ..Self::replay(id, "")
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |m: String| Err(GatewayError::Config(format!("model {:?}: {m}", self.id)));
        if self.id.trim().is_empty() {
            return bad("id must not be empty".into());
        }
        if self.retry.max_attempts < 1 {
            return bad("retry.max_attempts must be at least 1".into());
        }
        if !(self.request_timeout_s > 0.0 && self.request_timeout_s.is_finite()) {
            return bad("request_timeout_s must be positive".into());
        }
        if let Some(r) = &self.rate_limit {
            if !(r.requests_per_minute > 0.0 && r.requests_per_minute.is_finite()) || r.burst == 0 {
                return bad("rate_limit needs a positive rate and burst".into());
            }
        }
        match self.provider {
            Provider::Openai => {
                let Some(endpoint) = &self.endpoint else { return bad("endpoint is required".into()) };
                match reqwest::Url::parse(endpoint) {
                    Ok(u) if u.scheme() == "http" || u.scheme() == "https" => {}
                    _ => return bad(format!("endpoint {endpoint:?} is not an http(s) URL")),
                }
                if self.auth_env.as_deref().is_none_or(str::is_empty) {
                    return bad("auth_env is required".into());
                }
            }
            Provider::Replay => {
                if self.replay_dir.is_none() {
                    return bad("replay_dir is required".into());
                }
            }
        }
        Ok(())
    }
}

/// Identifies the episode a request belongs to; the replay provider uses it
/// to pick its fixture directory.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EpisodeKey {
    pub instance_id: String,
    pub variant: Variant,
    pub repetition: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderMeta {
    pub provider: Provider,
    pub model: String,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finish_reason: Option<String>,
    /// Replay fixture file that produced the response.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub raw_text: String,
    pub extracted_code: Option<String>,
    pub latency_s: f64,
    pub meta: ProviderMeta,
}

impl GenerationResult {
    pub(crate) fn new(raw_text: String, latency_s: f64, meta: ProviderMeta) -> Self {
        let extracted_code = extract_code(&raw_text);
        Self { raw_text, extracted_code, latency_s, meta }
    }
}

/// Failures of the model call itself, never attributed to the generated code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("authentication not configured: environment variable {env} is not set")]
    MissingToken { env: String },
    #[error("authentication rejected (HTTP {status})")]
    AuthRejected { status: u16 },
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("replay: {0}")]
    Replay(String),
    #[error("invalid model configuration: {0}")]
    Config(String),
}

/// Token bucket shared by every request made through one client.
#[derive(Debug)]
pub struct TokenBucket {
    capacity: f64,
    per_second: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn new(limit: &RateLimit) -> Self {
        let capacity = f64::from(limit.burst);
        Self { capacity, per_second: limit.requests_per_minute / 60.0, state: Mutex::new((capacity, Instant::now())) }
    }

    /// Blocks until a token is available, then takes it.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut s = self.state.lock().expect("bucket lock poisoned");
                let now = Instant::now();
                s.0 = (s.0 + now.duration_since(s.1).as_secs_f64() * self.per_second).min(self.capacity);
                s.1 = now;
                if s.0 >= 1.0 {
                    s.0 -= 1.0;
                    return;
                }
                (1.0 - s.0) / self.per_second
            };
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

/// A configured model endpoint.
#[derive(Debug)]
pub struct Gateway {
    config: ModelConfig,
    backend: Backend,
}

#[derive(Debug)]
enum Backend {
    Live(Box<LiveClient>),
    Replay(ReplayProvider),
}

impl Gateway {
    /// Validates `config` and, for live providers, resolves the token.
    pub fn new(config: &ModelConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        let backend = match config.provider {
            Provider::Openai => Backend::Live(Box::new(LiveClient::new(config.clone())?)),
            Provider::Replay => {
                Backend::Replay(ReplayProvider::new(config.id.clone(), config.replay_dir.clone().expect("validated")))
            }
        };
        Ok(Self { config: config.clone(), backend })
    }

    pub fn model_id(&self) -> &str {
        &self.config.id
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn system_prompt(&self) -> Option<&str> {
        self.config.system_prompt.as_deref()
    }

    /// Sends `conv`, whose last message is the pending user prompt.
    pub fn generate(&self, conv: &Conversation, key: &EpisodeKey) -> Result<GenerationResult, GatewayError> {
        match &self.backend {
            Backend::Live(c) => c.generate(conv),
            Backend::Replay(r) => r.generate(conv, key),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(ModelConfig::openai("m", "https://example.test/v1/chat/completions", "TOKEN").validate().is_ok());
        assert!(ModelConfig::openai("m", "not a url", "TOKEN").validate().is_err());
        let mut c = ModelConfig::replay("m", "/tmp");
        assert!(c.validate().is_ok());
        c.retry.max_attempts = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn backoff_grows() {
        let r = RetryPolicy { max_attempts: 4, backoff_s: 0.5, backoff_factor: 2.0 };
        assert_eq!(r.delay(1), Duration::from_millis(500));
        assert_eq!(r.delay(3), Duration::from_secs(2));
    }

    #[test]
    fn config_parses_from_toml() {
        let c: ModelConfig = toml::from_str(
            "id = \"gpt\"\nprovider = \"openai\"\nendpoint = \"http://localhost:1/v1\"\nauth_env = \"K\"\nretry = { max_attempts = 5, backoff_s = 0.1 }\n",
        )
        .unwrap();
        assert_eq!(c.retry.max_attempts, 5);
        assert_eq!(c.retry.backoff_factor, 2.0);
        assert!(toml::from_str::<ModelConfig>("id = \"x\"\nprovider = \"replay\"\nbogus = 1\n").is_err());
    }

    #[test]
    fn bucket_spaces_requests() {
        let b = TokenBucket::new(&RateLimit { requests_per_minute: 600.0, burst: 1 });
        let t = Instant::now();
        b.acquire();
        b.acquire();
        b.acquire();
        assert!(t.elapsed() >= Duration::from_millis(180));
    }
}
