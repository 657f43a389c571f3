//! Chat-completions client over blocking HTTP.

use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::json;

use super::{GatewayError, GenerationResult, ModelConfig, Provider, ProviderMeta, TokenBucket};
use crate::prompt::Conversation;

#[derive(Debug)]
pub struct LiveClient {
    config: ModelConfig,
    token: String,
    http: reqwest::blocking::Client,
    bucket: Option<TokenBucket>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

enum Attempt {
    Done(String, Option<String>),
    Retry(String, Option<Duration>),
    Fatal(GatewayError),
}

impl LiveClient {
    /// Reads the token from the configured environment variable; fails
    /// before any network traffic when it is unset.
    pub fn new(config: ModelConfig) -> Result<Self, GatewayError> {
        let env = config.auth_env.clone().unwrap_or_default();
        let token = std::env::var(&env).ok().filter(|t| !t.is_empty()).ok_or(GatewayError::MissingToken { env })?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.request_timeout_s))
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        let bucket = config.rate_limit.as_ref().map(TokenBucket::new);
        Ok(Self { config, token, http, bucket })
    }

    pub fn model_id(&self) -> &str {
        &self.config.id
    }

    fn request_body(&self, conv: &Conversation) -> serde_json::Value {
        let mut body = json!({ "model": self.config.id, "messages": conv.messages() });
        if let Some(t) = self.config.temperature {
            body["temperature"] = json!(t);
        }
        if let Some(m) = self.config.max_tokens {
            body["max_tokens"] = json!(m);
        }
        body
    }

    fn attempt(&self, body: &serde_json::Value) -> Attempt {
        if let Some(b) = &self.bucket {
            b.acquire();
        }
        let endpoint = self.config.endpoint.as_deref().expect("validated");
        let resp = match self.http.post(endpoint).bearer_auth(&self.token).json(body).send() {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(format!("transport: {e}"), None),
        };
        let status = resp.status().as_u16();
        let retry_after = resp
            .headers()
            .get("retry-after")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<f64>().ok())
            .map(|s| Duration::from_secs_f64(s.clamp(0.0, 60.0)));
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(format!("reading body: {e}"), None),
        };
        match status {
            200..=299 => match serde_json::from_str::<ChatResponse>(&text) {
                Ok(r) => match r.choices.into_iter().next() {
                    Some(Choice { message: ChoiceMessage { content: Some(c) }, finish_reason }) => {
                        Attempt::Done(c, finish_reason)
                    }
                    _ => Attempt::Fatal(GatewayError::Malformed("no message content in first choice".into())),
                },
                Err(e) => Attempt::Fatal(GatewayError::Malformed(e.to_string())),
            },
            401 | 403 => Attempt::Fatal(GatewayError::AuthRejected { status }),
            408 | 429 | 500..=599 => Attempt::Retry(format!("HTTP {status}"), retry_after),
            _ => Attempt::Fatal(GatewayError::Http { status, body: text.chars().take(500).collect() }),
        }
    }

    pub fn generate(&self, conv: &Conversation) -> Result<GenerationResult, GatewayError> {
        let start = Instant::now();
        let body = self.request_body(conv);
        let policy = &self.config.retry;
        let mut last = String::new();
        for attempt in 1..=policy.max_attempts {
            match self.attempt(&body) {
                Attempt::Done(text, finish_reason) => {
                    let meta = ProviderMeta {
                        provider: Provider::Openai,
                        model: self.config.id.clone(),
                        attempts: attempt,
                        finish_reason,
                        fixture: None,
                    };
                    return Ok(GenerationResult::new(text, start.elapsed().as_secs_f64(), meta));
                }
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(reason, after) => {
                    log::warn!("model {}: attempt {attempt} failed: {reason}", self.config.id);
                    last = reason;
                    if attempt < policy.max_attempts {
                        std::thread::sleep(after.unwrap_or_else(|| policy.delay(attempt)));
                    }
                }
            }
        }
        Err(GatewayError::RetriesExhausted { attempts: policy.max_attempts, last })
    }
}
