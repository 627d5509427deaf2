//! Uniform access to external generative services.
//!
//! A [`GenClient`] wraps one registered endpoint and one [`Backend`]. Every
//! request is keyed by a stable hash of `(model_id, kind, canonical payload,
//! seed)`; a repeated request is served from the [`ArtifactStore`] without
//! touching the backend. Misses go through the endpoint's token bucket and
//! an exponential-backoff retry loop, and the result is persisted with a
//! provenance sidecar.

pub mod http;
pub mod media;
pub mod mock;
pub mod store;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

pub use store::{ArtifactStore, Digest, Provenance, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenKind {
    Llm,
    T2i,
    I2i,
    Flf2v,
    GuidedInterp,
}

impl GenKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GenKind::Llm => "llm",
            GenKind::T2i => "t2i",
            GenKind::I2i => "i2i",
            GenKind::Flf2v => "flf2v",
            GenKind::GuidedInterp => "guided_interp",
        }
    }

    /// Payload fields holding artifact digests that must exist before a call.
    fn input_fields(self) -> &'static [&'static str] {
        match self {
            GenKind::Llm | GenKind::T2i => &[],
            GenKind::I2i => &["source"],
            GenKind::Flf2v => &["first", "last"],
            GenKind::GuidedInterp => &["first", "last", "control_field"],
        }
    }
}

impl fmt::Display for GenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("request to {model_id} timed out after {attempts} attempt(s)")]
    Timeout { model_id: String, attempts: u32 },
    #[error("request to {model_id} failed after {attempts} attempt(s): {last}")]
    Exhausted { model_id: String, attempts: u32, last: BackendError },
    #[error("invalid payload: {0}")]
    Payload(String),
    #[error("endpoint {model_id} serves {serves}, not {requested}")]
    WrongKind { model_id: String, serves: GenKind, requested: GenKind },
    #[error("model returned a non-text reply")]
    NotText,
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Failure reported by a backend for a single attempt.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum BackendError {
    #[error("timed out")]
    Timeout,
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport: {0}")]
    Transport(String),
    #[error("rejected payload: {0}")]
    Rejected(String),
}

impl BackendError {
    fn retryable(&self) -> bool {
        match self {
            BackendError::Timeout | BackendError::Transport(_) => true,
            BackendError::Http { status, .. } => *status == 429 || *status >= 500,
            BackendError::Rejected(_) => false,
        }
    }
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("malformed endpoint registry: {0}")]
    Parse(String),
    #[error("duplicate model id {0:?}")]
    Duplicate(String),
    #[error("endpoint {0:?} must have a positive timeout")]
    BadTimeout(String),
    #[error("unknown model id {0:?}")]
    Unknown(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEndpoint {
    pub model_id: String,
    pub kind: GenKind,
    #[serde(default)]
    pub base_url: String,
    /// Name of the environment variable holding the API secret.
    #[serde(default)]
    pub auth_ref: Option<String>,
    /// Requests per minute; 0 disables limiting.
    #[serde(default)]
    pub rate_limit: u32,
    #[serde(default = "default_timeout")]
    pub timeout: f64,
}

fn default_timeout() -> f64 {
    120.0
}

impl ModelEndpoint {
    pub fn new(model_id: &str, kind: GenKind) -> Self {
        Self {
            model_id: model_id.to_string(),
            kind,
            base_url: String::new(),
            auth_ref: None,
            rate_limit: 0,
            timeout: default_timeout(),
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout)
    }
}

/// Endpoints keyed by model id.
#[derive(Debug, Clone, Default)]
pub struct EndpointRegistry {
    endpoints: BTreeMap<String, ModelEndpoint>,
}

impl EndpointRegistry {
    pub fn from_endpoints(list: Vec<ModelEndpoint>) -> Result<Self, RegistryError> {
        let mut endpoints = BTreeMap::new();
        for ep in list {
            if !(ep.timeout > 0.0 && ep.timeout.is_finite()) {
                return Err(RegistryError::BadTimeout(ep.model_id));
            }
            if endpoints.contains_key(&ep.model_id) {
                return Err(RegistryError::Duplicate(ep.model_id));
            }
            endpoints.insert(ep.model_id.clone(), ep);
        }
        Ok(Self { endpoints })
    }

    /// Parses `[[endpoint]]` tables from TOML.
    pub fn load(toml_text: &str) -> Result<Self, RegistryError> {
        #[derive(Deserialize)]
        struct Doc {
            #[serde(default)]
            endpoint: Vec<ModelEndpoint>,
        }
        let doc: Doc = toml::from_str(toml_text).map_err(|e| RegistryError::Parse(e.to_string()))?;
        Self::from_endpoints(doc.endpoint)
    }

    pub fn get(&self, model_id: &str) -> Result<&ModelEndpoint, RegistryError> {
        self.endpoints.get(model_id).ok_or_else(|| RegistryError::Unknown(model_id.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &ModelEndpoint> {
        self.endpoints.values()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenRequest {
    pub kind: GenKind,
    pub payload: Value,
    pub seed: u64,
}

impl GenRequest {
    /// Canonical JSON for the request as addressed to `model_id`. Object keys
    /// are emitted in sorted order, so equal payloads give equal text.
    pub fn canonical(&self, model_id: &str) -> String {
        json!({
            "model_id": model_id,
            "kind": self.kind,
            "payload": self.payload,
            "seed": self.seed,
        })
        .to_string()
    }

    pub fn cache_key(&self, model_id: &str) -> String {
        hex::encode(Sha256::digest(self.canonical(model_id).as_bytes()))
    }

    pub fn payload_hash(&self) -> String {
        hex::encode(Sha256::digest(self.payload.to_string().as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendOutput {
    pub bytes: Vec<u8>,
    pub metadata: Value,
}

/// The thing that actually produces bytes: a remote adapter or a mock.
pub trait Backend: Send + Sync {
    /// `inputs` holds the bytes of every referenced artifact, in the order of
    /// the kind's input fields.
    fn call(
        &self,
        endpoint: &ModelEndpoint,
        request: &GenRequest,
        inputs: &[Vec<u8>],
    ) -> Result<BackendOutput, BackendError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenResponse {
    pub artifact: Digest,
    pub latency: Duration,
    pub metadata: Value,
    pub cache_hit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Total attempts per request, including the first.
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
    pub jitter: bool,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 3, base_delay_ms: 250, max_delay_ms: 8_000, jitter: true }
    }
}

impl RetryPolicy {
    pub fn immediate(max_attempts: u32) -> Self {
        Self { max_attempts, base_delay_ms: 0, max_delay_ms: 0, jitter: false }
    }

    /// Delay before retry number `retry` (0-based).
    pub fn delay(&self, retry: u32) -> Duration {
        let exp = self.base_delay_ms.saturating_mul(1u64 << retry.min(20)).min(self.max_delay_ms);
        let ms = if self.jitter && exp > 0 { rand::random_range(exp / 2..=exp) } else { exp };
        Duration::from_millis(ms)
    }
}

/// Token bucket refilled at `per_minute / 60` tokens per second.
#[derive(Debug)]
struct RateLimiter {
    per_second: f64,
    capacity: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    fn new(per_minute: u32) -> Self {
        let per_second = per_minute as f64 / 60.0;
        let capacity = per_second.max(1.0);
        Self { per_second, capacity, state: Mutex::new((capacity, Instant::now())) }
    }

    fn acquire(&self) {
        if self.per_second <= 0.0 {
            return;
        }
        loop {
            let wait = {
                let mut st = self.state.lock().unwrap();
                let now = Instant::now();
                let refill = now.duration_since(st.1).as_secs_f64() * self.per_second;
                st.0 = (st.0 + refill).min(self.capacity);
                st.1 = now;
                if st.0 >= 1.0 {
                    st.0 -= 1.0;
                    return;
                }
                (1.0 - st.0) / self.per_second
            };
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

/// Structured prompt for a language model. Remote adapters send `text`
/// (and `schema_hint` when present); `context` carries the structured inputs
/// the prompt was rendered from, which the mock backend reads directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmPrompt {
    pub role: String,
    pub text: String,
    #[serde(default)]
    pub schema_hint: Option<String>,
    #[serde(default)]
    pub context: Value,
}

/// Camera-trajectory triplet sent alongside first/last-frame video requests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletPrompt {
    pub shot_init: String,
    pub movement: String,
    pub shot_end: String,
}

pub struct GenClient {
    endpoint: ModelEndpoint,
    backend: Arc<dyn Backend>,
    store: ArtifactStore,
    retry: RetryPolicy,
    limiter: RateLimiter,
    attempts: AtomicU64,
}

impl fmt::Debug for GenClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GenClient")
            .field("endpoint", &self.endpoint)
            .field("retry", &self.retry)
            .finish_non_exhaustive()
    }
}

impl GenClient {
    pub fn new(endpoint: ModelEndpoint, backend: Arc<dyn Backend>, store: ArtifactStore, retry: RetryPolicy) -> Self {
        let limiter = RateLimiter::new(endpoint.rate_limit);
        Self { endpoint, backend, store, retry, limiter, attempts: AtomicU64::new(0) }
    }

    pub fn model_id(&self) -> &str {
        &self.endpoint.model_id
    }

    pub fn endpoint(&self) -> &ModelEndpoint {
        &self.endpoint
    }

    pub fn store(&self) -> &ArtifactStore {
        &self.store
    }

    /// Backend attempts made so far (cache hits do not count).
    pub fn backend_attempts(&self) -> u64 {
        self.attempts.load(Ordering::Relaxed)
    }

    fn validate(&self, request: &GenRequest) -> Result<Vec<Digest>, ClientError> {
        if request.kind != self.endpoint.kind {
            return Err(ClientError::WrongKind {
                model_id: self.endpoint.model_id.clone(),
                serves: self.endpoint.kind,
                requested: request.kind,
            });
        }
        let obj =
            request.payload.as_object().ok_or_else(|| ClientError::Payload("payload must be an object".into()))?;
        let needs_prompt = !matches!(request.kind, GenKind::GuidedInterp);
        if needs_prompt && obj.get("prompt").is_none_or(|p| p.is_null()) {
            return Err(ClientError::Payload("missing prompt".into()));
        }
        if let Some(Value::String(s)) = obj.get("prompt") {
            if s.trim().is_empty() {
                return Err(ClientError::Payload("empty prompt".into()));
            }
        }
        request
            .kind
            .input_fields()
            .iter()
            .map(|field| {
                let s = obj
                    .get(*field)
                    .and_then(Value::as_str)
                    .ok_or_else(|| ClientError::Payload(format!("missing artifact field {field:?}")))?;
                let d: Digest = s.parse()?;
                if !self.store.contains(&d) {
                    return Err(ClientError::Store(StoreError::NotFound(d)));
                }
                Ok(d)
            })
            .collect()
    }

    /// Runs one request through cache, rate limit, retries and persistence.
    pub fn execute(&self, request: &GenRequest) -> Result<GenResponse, ClientError> {
        let started = Instant::now();
        let inputs = self.validate(request)?;
        let key = request.cache_key(&self.endpoint.model_id);
        if let Some(artifact) = self.store.cache_lookup(&key)? {
            return Ok(GenResponse {
                artifact,
                latency: started.elapsed(),
                metadata: json!({ "cache": "hit" }),
                cache_hit: true,
            });
        }
        let input_bytes = inputs.iter().map(|d| self.store.get(d)).collect::<Result<Vec<_>, _>>()?;
        self.store.log_wire(&key, &request.canonical(&self.endpoint.model_id))?;

        let mut attempt = 0;
        let output = loop {
            self.limiter.acquire();
            self.attempts.fetch_add(1, Ordering::Relaxed);
            attempt += 1;
            match self.backend.call(&self.endpoint, request, &input_bytes) {
                Ok(out) => break out,
                Err(e) if e.retryable() && attempt < self.retry.max_attempts => {
                    log::warn!("{} attempt {attempt} failed: {e}", self.endpoint.model_id);
                    std::thread::sleep(self.retry.delay(attempt - 1));
                }
                Err(BackendError::Timeout) => {
                    return Err(ClientError::Timeout { model_id: self.endpoint.model_id.clone(), attempts: attempt })
                }
                Err(e) => {
                    return Err(ClientError::Exhausted {
                        model_id: self.endpoint.model_id.clone(),
                        attempts: attempt,
                        last: e,
                    })
                }
            }
        };

        let provenance = Provenance {
            model_id: self.endpoint.model_id.clone(),
            kind: request.kind.as_str().to_string(),
            payload_hash: request.payload_hash(),
            seed: request.seed,
            timestamp: chrono::Utc::now(),
            inputs,
        };
        let digest = self.store.put(&output.bytes, &provenance)?;
        let artifact = self.store.cache_insert(&key, &digest)?;
        Ok(GenResponse { artifact, latency: started.elapsed(), metadata: output.metadata, cache_hit: false })
    }

    pub fn llm_complete(&self, prompt: &LlmPrompt, seed: u64) -> Result<String, ClientError> {
        let payload = json!({
            "role": prompt.role,
            "prompt": prompt.text,
            "schema_hint": prompt.schema_hint,
            "context": prompt.context,
        });
        let resp = self.execute(&GenRequest { kind: GenKind::Llm, payload, seed })?;
        String::from_utf8(self.store.get(&resp.artifact)?).map_err(|_| ClientError::NotText)
    }

    pub fn image_generate(&self, prompt: &str, seed: u64) -> Result<Digest, ClientError> {
        let payload = json!({ "prompt": prompt });
        Ok(self.execute(&GenRequest { kind: GenKind::T2i, payload, seed })?.artifact)
    }

    pub fn image_edit(&self, source: &Digest, prompt: &str, seed: u64) -> Result<Digest, ClientError> {
        let payload = json!({ "source": source, "prompt": prompt });
        Ok(self.execute(&GenRequest { kind: GenKind::I2i, payload, seed })?.artifact)
    }

    pub fn video_flf2v(
        &self,
        first: &Digest,
        last: &Digest,
        triplet: &TripletPrompt,
        seed: u64,
    ) -> Result<Digest, ClientError> {
        let payload = json!({ "first": first, "last": last, "prompt": triplet });
        Ok(self.execute(&GenRequest { kind: GenKind::Flf2v, payload, seed })?.artifact)
    }

    pub fn guided_interpolate(
        &self,
        first: &Digest,
        last: &Digest,
        control_field: &Digest,
        seed: u64,
    ) -> Result<Digest, ClientError> {
        let payload = json!({ "first": first, "last": last, "control_field": control_field });
        Ok(self.execute(&GenRequest { kind: GenKind::GuidedInterp, payload, seed })?.artifact)
    }
}
