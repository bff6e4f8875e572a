//! Backend implementations: OpenAI-compatible HTTP, fixture replay, and a
//! scripted program table for tests.

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{BackendId, CacheKey, DecodingConfig, DiskCache, GatewayError, PromptRequest, TokenUsage};

/// What a backend returns for one request.
#[derive(Debug, Clone)]
pub struct BackendResponse {
    pub text: String,
    pub token_usage: Option<TokenUsage>,
}

/// A completion producer. The cache key is passed in so replay-style
/// backends can address their fixtures without rehashing.
pub trait Backend: Send + Sync {
    fn id(&self) -> BackendId;

    fn complete(
        &self,
        request: &PromptRequest,
        decoding: &DecodingConfig,
        key: &CacheKey,
    ) -> Result<BackendResponse, GatewayError>;
}

/// Bounded retries with exponential backoff, applied only to transport
/// failures and 5xx responses. 4xx responses fail immediately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            initial_backoff: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    fn backoff(&self, attempt: u32) -> Duration {
        self.initial_backoff.saturating_mul(1u32 << attempt.min(16))
    }
}

/// Connection settings for the OpenAI-compatible chat endpoint.
///
/// `base_url` should include any `/v1` path prefix the provider expects;
/// the backend appends `/chat/completions`.
#[derive(Debug, Clone)]
pub struct HttpConfig {
    pub base_url: Option<String>,
    pub api_key: Option<String>,
    /// Include `top_k` in the payload; many endpoints reject it.
    pub send_top_k: bool,
    pub retry: RetryPolicy,
    pub timeout: Duration,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            base_url: None,
            api_key: None,
            send_top_k: false,
            retry: RetryPolicy::default(),
            timeout: Duration::from_secs(120),
        }
    }
}

impl HttpConfig {
    /// Fill endpoint and credential from `TREQA_API_BASE` / `TREQA_API_KEY`
    /// where the config leaves them unset.
    pub fn with_env(mut self) -> Self {
        if self.base_url.is_none() {
            self.base_url = std::env::var("TREQA_API_BASE").ok().filter(|s| !s.is_empty());
        }
        if self.api_key.is_none() {
            self.api_key = std::env::var("TREQA_API_KEY").ok().filter(|s| !s.is_empty());
        }
        self
    }
}

/// Remote backend speaking the OpenAI chat-completions wire format.
pub struct HttpBackend {
    endpoint: String,
    api_key: Option<String>,
    send_top_k: bool,
    retry: RetryPolicy,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, GatewayError> {
        let base = config.base_url.ok_or_else(|| {
            GatewayError::NotConfigured(
                "http backend needs an endpoint (config base_url or TREQA_API_BASE)".into(),
            )
        })?;
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| GatewayError::NotConfigured(e.to_string()))?;
        Ok(Self {
            endpoint: format!("{}/chat/completions", base.trim_end_matches('/')),
            api_key: config.api_key,
            send_top_k: config.send_top_k,
            retry: config.retry,
            client,
        })
    }

    fn payload(&self, request: &PromptRequest, decoding: &DecodingConfig) -> serde_json::Value {
        let mut body = json!({
            "model": request.model_id,
            "messages": [
                {"role": "system", "content": request.system_message},
                {"role": "user", "content": request.user_message},
            ],
            "temperature": decoding.temperature,
            "max_tokens": decoding.max_tokens,
        });
        if !decoding.is_greedy() {
            body["top_p"] = json!(decoding.top_p);
            if self.send_top_k {
                if let Some(k) = decoding.top_k {
                    body["top_k"] = json!(k);
                }
            }
        }
        if let Some(seed) = decoding.seed {
            body["seed"] = json!(seed);
        }
        body
    }

    fn attempt(
        &self,
        body: &serde_json::Value,
        attempts_so_far: u32,
    ) -> Result<BackendResponse, GatewayError> {
        let mut builder = self.client.post(&self.endpoint).json(body);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(|e| GatewayError::Transport {
            message: e.to_string(),
            attempts: attempts_so_far + 1,
        })?;
        let status = response.status().as_u16();
        let text = response.text().map_err(|e| GatewayError::Transport {
            message: e.to_string(),
            attempts: attempts_so_far + 1,
        })?;
        if status != 200 {
            return Err(GatewayError::Http {
                status,
                message: truncate(&text, 300),
                attempts: attempts_so_far + 1,
            });
        }
        parse_chat_completion(&text)
    }
}

impl Backend for HttpBackend {
    fn id(&self) -> BackendId {
        BackendId::Http
    }

    fn complete(
        &self,
        request: &PromptRequest,
        decoding: &DecodingConfig,
        _key: &CacheKey,
    ) -> Result<BackendResponse, GatewayError> {
        let body = self.payload(request, decoding);
        let mut last_err = None;
        for attempt in 0..self.retry.attempts {
            match self.attempt(&body, attempt) {
                Ok(resp) => return Ok(resp),
                Err(e) if e.is_retriable() && attempt + 1 < self.retry.attempts => {
                    log::warn!("backend attempt {} failed, retrying: {e}", attempt + 1);
                    std::thread::sleep(self.retry.backoff(attempt));
                    last_err = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
        Err(last_err.expect("at least one attempt"))
    }
}

fn truncate(s: &str, max: usize) -> String {
    if s.len() <= max {
        s.to_string()
    } else {
        let cut = s.char_indices().take_while(|(i, _)| *i < max).last().map(|(i, c)| i + c.len_utf8()).unwrap_or(0);
        format!("{}…", &s[..cut])
    }
}

fn parse_chat_completion(text: &str) -> Result<BackendResponse, GatewayError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
    let content = value
        .pointer("/choices/0/message/content")
        .and_then(|v| v.as_str())
        .ok_or_else(|| {
            GatewayError::MalformedResponse("no choices[0].message.content in response".into())
        })?;
    let token_usage = match (
        value.pointer("/usage/prompt_tokens").and_then(|v| v.as_u64()),
        value.pointer("/usage/completion_tokens").and_then(|v| v.as_u64()),
    ) {
        (Some(prompt_tokens), Some(completion_tokens)) => Some(TokenUsage {
            prompt_tokens,
            completion_tokens,
        }),
        _ => None,
    };
    Ok(BackendResponse {
        text: content.to_string(),
        token_usage,
    })
}

/// Serves completions from previously recorded fixture files and never
/// contacts anything. A missing fixture is an error naming the key.
pub struct ReplayBackend {
    cache: DiskCache,
}

impl ReplayBackend {
    pub fn new(fixture_dir: impl Into<PathBuf>) -> Self {
        Self {
            cache: DiskCache::new(fixture_dir),
        }
    }
}

impl Backend for ReplayBackend {
    fn id(&self) -> BackendId {
        BackendId::Replay
    }

    fn complete(
        &self,
        _request: &PromptRequest,
        _decoding: &DecodingConfig,
        key: &CacheKey,
    ) -> Result<BackendResponse, GatewayError> {
        match self.cache.read(key)? {
            Some(entry) => Ok(BackendResponse {
                text: entry.text,
                token_usage: entry.token_usage,
            }),
            None => Err(GatewayError::FixtureMissing {
                digest: key.digest.clone(),
            }),
        }
    }
}

/// One substring-match rule of a scripted program table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptRule {
    /// Matches when the user message contains this text.
    pub user_contains: String,
    pub response: String,
}

type Program = Box<dyn Fn(&PromptRequest, &DecodingConfig) -> Option<String> + Send + Sync>;

/// Deterministic in-process backend driven by a rule table or a closure.
pub struct ScriptedBackend {
    program: Program,
}

impl ScriptedBackend {
    /// First rule whose `user_contains` matches wins.
    pub fn from_rules(rules: Vec<ScriptRule>) -> Self {
        Self::with_program(move |request, _| {
            rules
                .iter()
                .find(|r| request.user_message.contains(&r.user_contains))
                .map(|r| r.response.clone())
        })
    }

    /// Same response for every request.
    pub fn constant(text: impl Into<String>) -> Self {
        let text = text.into();
        Self::with_program(move |_, _| Some(text.clone()))
    }

    /// Arbitrary program; returning `None` means no rule matched.
    pub fn with_program<F>(program: F) -> Self
    where
        F: Fn(&PromptRequest, &DecodingConfig) -> Option<String> + Send + Sync + 'static,
    {
        Self {
            program: Box::new(program),
        }
    }
}

impl Backend for ScriptedBackend {
    fn id(&self) -> BackendId {
        BackendId::Scripted
    }

    fn complete(
        &self,
        request: &PromptRequest,
        decoding: &DecodingConfig,
        _key: &CacheKey,
    ) -> Result<BackendResponse, GatewayError> {
        match (self.program)(request, decoding) {
            Some(text) => Ok(BackendResponse {
                text,
                token_usage: None,
            }),
            None => Err(GatewayError::ScriptNoMatch {
                preview: request.user_message.chars().take(60).collect(),
            }),
        }
    }
}
