//! Uniform access to text-completion backends with a persistent,
//! content-addressed response cache.
//!
//! Three backends share one interface: a remote OpenAI-compatible chat
//! endpoint, deterministic replay from previously recorded fixtures, and a
//! scripted program table for tests. Every completion is keyed by a digest
//! of the full request (backend, model, messages, decoding); the cache is
//! the unit of reproducibility — a warm cache or a replay fixture
//! directory makes a whole pipeline run bit-reproducible.

mod backends;

pub use backends::{Backend, BackendResponse, HttpBackend, HttpConfig, ReplayBackend, RetryPolicy, ScriptRule, ScriptedBackend};

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::artifacts;

/// Which backend a request is addressed to; part of the cache key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendId {
    Http,
    Replay,
    Scripted,
}

impl BackendId {
    pub fn as_str(&self) -> &'static str {
        match self {
            BackendId::Http => "http",
            BackendId::Replay => "replay",
            BackendId::Scripted => "scripted",
        }
    }
}

impl fmt::Display for BackendId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Model and backend a prompt builder should address requests to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub model_id: String,
    pub backend_id: BackendId,
}

impl ModelSpec {
    pub fn new(model_id: impl Into<String>, backend_id: BackendId) -> Self {
        Self {
            model_id: model_id.into(),
            backend_id,
        }
    }
}

/// One chat-completion request: a system message and a user message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub system_message: String,
    pub user_message: String,
    pub model_id: String,
    pub backend_id: BackendId,
}

impl PromptRequest {
    pub fn new(spec: &ModelSpec, system_message: impl Into<String>, user_message: impl Into<String>) -> Self {
        Self {
            system_message: system_message.into(),
            user_message: user_message.into(),
            model_id: spec.model_id.clone(),
            backend_id: spec.backend_id,
        }
    }
}

/// Decoding parameters sent with every request.
///
/// Temperature 0 means greedy decoding; top-p/top-k are then not sent to
/// the backend at all, so they cannot influence the result. All fields
/// still enter the cache key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingConfig {
    pub temperature: f64,
    pub top_p: f64,
    /// `None` leaves the vocabulary unrestricted.
    pub top_k: Option<u32>,
    pub max_tokens: u32,
    pub seed: Option<u64>,
}

impl DecodingConfig {
    /// Greedy decoding, the default for scoring runs.
    pub fn greedy() -> Self {
        Self {
            temperature: 0.0,
            top_p: 1.0,
            top_k: None,
            max_tokens: 1024,
            seed: None,
        }
    }

    /// The recommended sampling parameters for question generation.
    pub fn sampling() -> Self {
        Self {
            temperature: 0.7,
            top_p: 0.8,
            top_k: Some(20),
            max_tokens: 1024,
            seed: Some(0),
        }
    }

    pub fn is_greedy(&self) -> bool {
        self.temperature == 0.0
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(GatewayError::InvalidDecoding(format!(
                "temperature must be a non-negative real, got {}",
                self.temperature
            )));
        }
        if !self.top_p.is_finite() || self.top_p <= 0.0 || self.top_p > 1.0 {
            return Err(GatewayError::InvalidDecoding(format!(
                "top_p must lie in (0, 1], got {}",
                self.top_p
            )));
        }
        if self.top_k == Some(0) {
            return Err(GatewayError::InvalidDecoding(
                "top_k must be positive or absent".into(),
            ));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidDecoding(
                "max_tokens must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Token counts reported by a backend, when available.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// A completion as produced by the backend, untouched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionResult {
    pub text: String,
    pub cache_hit: bool,
    pub backend_id: BackendId,
    pub token_usage: Option<TokenUsage>,
}

/// Content digest identifying one (request, decoding) pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CacheKey {
    pub digest: String,
}

impl fmt::Display for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.digest)
    }
}

/// Deterministic digest over every request and decoding field.
///
/// Fields are length-prefixed before hashing, so no two distinct field
/// sequences collide; floats hash by their IEEE-754 bits.
pub fn cache_key(request: &PromptRequest, decoding: &DecodingConfig) -> CacheKey {
    let mut hasher = Sha256::new();
    let mut put = |bytes: &[u8]| {
        hasher.update((bytes.len() as u64).to_be_bytes());
        hasher.update(bytes);
    };
    put(request.backend_id.as_str().as_bytes());
    put(request.model_id.as_bytes());
    put(request.system_message.as_bytes());
    put(request.user_message.as_bytes());
    put(&decoding.temperature.to_bits().to_be_bytes());
    put(&decoding.top_p.to_bits().to_be_bytes());
    match decoding.top_k {
        Some(k) => put(format!("k{k}").as_bytes()),
        None => put(b"k-"),
    }
    put(&u64::from(decoding.max_tokens).to_be_bytes());
    match decoding.seed {
        Some(s) => put(format!("s{s}").as_bytes()),
        None => put(b"s-"),
    }
    CacheKey {
        digest: hex::encode(hasher.finalize()),
    }
}

/// On-disk form of one cached completion: the raw text plus the request
/// that produced it, for inspection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheEntry {
    pub digest: String,
    pub backend_id: BackendId,
    pub model_id: String,
    pub system_message: String,
    pub user_message: String,
    pub decoding: DecodingConfig,
    pub text: String,
    pub token_usage: Option<TokenUsage>,
}

/// One file per completion under `<dir>/<first 2 hex>/<digest>.json`.
#[derive(Debug, Clone)]
pub struct DiskCache {
    dir: PathBuf,
}

impl DiskCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn entry_path(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(&key.digest[..2]).join(format!("{}.json", key.digest))
    }

    pub fn read(&self, key: &CacheKey) -> Result<Option<CacheEntry>, GatewayError> {
        let path = self.entry_path(key);
        let bytes = match std::fs::read(&path) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(GatewayError::CacheIo { path, source: e }),
        };
        let entry: CacheEntry = serde_json::from_slice(&bytes).map_err(|e| GatewayError::CacheIo {
            path,
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
        })?;
        Ok(Some(entry))
    }

    pub fn write(&self, key: &CacheKey, entry: &CacheEntry) -> Result<(), GatewayError> {
        let path = self.entry_path(key);
        let bytes = serde_json::to_vec_pretty(entry).expect("cache entry serializes");
        artifacts::atomic_write(&path, &bytes).map_err(|e| GatewayError::CacheIo { path, source: e })
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("user message is empty")]
    EmptyUserMessage,
    #[error("invalid decoding config: {0}")]
    InvalidDecoding(String),
    #[error("backend not configured: {0}")]
    NotConfigured(String),
    #[error("http error {status} after {attempts} attempt(s): {message}")]
    Http {
        status: u16,
        message: String,
        attempts: u32,
    },
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { message: String, attempts: u32 },
    #[error("replay fixture missing for cache key {digest}")]
    FixtureMissing { digest: String },
    #[error("scripted backend has no rule matching request (user message starts {preview:?})")]
    ScriptNoMatch { preview: String },
    #[error("malformed completion payload: {0}")]
    MalformedResponse(String),
    #[error("cache i/o at {path}: {source}")]
    CacheIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl GatewayError {
    /// Whether retrying the same request could plausibly succeed.
    pub fn is_retriable(&self) -> bool {
        match self {
            GatewayError::Transport { .. } => true,
            GatewayError::Http { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

// Counting semaphore bounding outstanding backend calls.
struct Limiter {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl Limiter {
    fn new(n: usize) -> Self {
        Self {
            permits: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> LimiterGuard<'_> {
        let mut permits = self.permits.lock().expect("limiter lock");
        while *permits == 0 {
            permits = self.cv.wait(permits).expect("limiter wait");
        }
        *permits -= 1;
        LimiterGuard { limiter: self }
    }
}

struct LimiterGuard<'a> {
    limiter: &'a Limiter,
}

impl Drop for LimiterGuard<'_> {
    fn drop(&mut self) {
        let mut permits = self.limiter.permits.lock().expect("limiter lock");
        *permits += 1;
        self.limiter.cv.notify_one();
    }
}

/// Completion front end: one backend, an optional cache, and a bound on
/// concurrent backend calls.
///
/// The label is the [`BackendId`] stamped into requests built against this
/// gateway. Normally it matches the backend implementation; a recording
/// gateway labels requests `replay` while serving them from another
/// backend, so the entries it caches are exactly the fixtures a later
/// replay run will look up.
pub struct Gateway {
    backend: Box<dyn Backend>,
    label: BackendId,
    cache: Option<DiskCache>,
    limiter: Limiter,
}

impl Gateway {
    pub fn new(backend: Box<dyn Backend>, cache: Option<DiskCache>) -> Self {
        let label = backend.id();
        Self {
            backend,
            label,
            cache,
            limiter: Limiter::new(4),
        }
    }

    /// Serve requests labeled `replay` from `backend`, recording fixtures
    /// into `fixture_dir`.
    pub fn recording(backend: Box<dyn Backend>, fixture_dir: &Path) -> Self {
        Self {
            backend,
            label: BackendId::Replay,
            cache: Some(DiskCache::new(fixture_dir)),
            limiter: Limiter::new(4),
        }
    }

    pub fn with_concurrency(mut self, limit: usize) -> Self {
        self.limiter = Limiter::new(limit);
        self
    }

    /// The backend id requests through this gateway should carry.
    pub fn label(&self) -> BackendId {
        self.label
    }

    pub fn model_spec(&self, model_id: impl Into<String>) -> ModelSpec {
        ModelSpec::new(model_id, self.label)
    }

    /// Complete a request, consulting the cache first.
    ///
    /// A hit returns the cached text verbatim without touching the
    /// backend; a miss calls the backend under the concurrency limit and
    /// persists the result before returning it.
    pub fn complete(
        &self,
        request: &PromptRequest,
        decoding: &DecodingConfig,
    ) -> Result<CompletionResult, GatewayError> {
        if request.user_message.is_empty() {
            return Err(GatewayError::EmptyUserMessage);
        }
        decoding.validate()?;
        let key = cache_key(request, decoding);

        if let Some(cache) = &self.cache {
            if let Some(entry) = cache.read(&key)? {
                return Ok(CompletionResult {
                    text: entry.text,
                    cache_hit: true,
                    backend_id: request.backend_id,
                    token_usage: entry.token_usage,
                });
            }
        }

        let response = {
            let _permit = self.limiter.acquire();
            self.backend.complete(request, decoding, &key)?
        };

        if let Some(cache) = &self.cache {
            cache.write(
                &key,
                &CacheEntry {
                    digest: key.digest.clone(),
                    backend_id: request.backend_id,
                    model_id: request.model_id.clone(),
                    system_message: request.system_message.clone(),
                    user_message: request.user_message.clone(),
                    decoding: decoding.clone(),
                    text: response.text.clone(),
                    token_usage: response.token_usage,
                },
            )?;
        }

        Ok(CompletionResult {
            text: response.text,
            cache_hit: false,
            backend_id: request.backend_id,
            token_usage: response.token_usage,
        })
    }
}
