//! Model access: structured chat generation and text embeddings.
//!
//! Every pipeline step talks to models through [`Gateway`]. A gateway wraps a
//! [`Backend`] (HTTP, scripted, or synthetic) and adds:
//!
//! - response-schema validation with bounded repair retries,
//! - transport retries with exponential backoff and `Retry-After` support,
//! - a shared in-flight request limit,
//! - per-scope call counters (each run gets its own scope).

mod embedder;
mod http;
pub mod schema;
mod scripted;
mod synthetic;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU32, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::Semaphore;

pub use embedder::HashEmbedder;
pub use http::{CassetteMode, HttpBackend, HttpConfig};
pub use schema::{extract_json, FieldKind, FieldSpec, ResponseSchema};
pub use scripted::{Matcher, ScriptRule, ScriptedBackend};
pub use synthetic::SyntheticBackend;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub name: String,
    pub text: String,
}

/// A request for one structured generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    /// Pipeline step that issued the prompt, e.g. `"decision"`.
    pub role_tag: String,
    pub sections: Vec<Section>,
    pub response_schema: String,
    pub temperature: f64,
    pub seed: Option<u64>,
}

impl PromptSpec {
    pub fn new(role_tag: &str, response_schema: &str) -> Self {
        Self {
            role_tag: role_tag.to_string(),
            sections: Vec::new(),
            response_schema: response_schema.to_string(),
            temperature: 0.7,
            seed: None,
        }
    }

    pub fn section(mut self, name: &str, text: impl Into<String>) -> Self {
        self.sections.push(Section {
            name: name.to_string(),
            text: text.into(),
        });
        self
    }

    pub fn seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.sections
            .iter()
            .find(|s| s.name == name)
            .map(|s| s.text.as_str())
    }

    /// Sections rendered in order as `Name:\ntext`, separated by blank lines.
    pub fn render(&self) -> String {
        self.sections
            .iter()
            .map(|s| {
                if s.name.is_empty() {
                    s.text.clone()
                } else {
                    format!("{}:\n{}", s.name, s.text)
                }
            })
            .collect::<Vec<_>>()
            .join("\n\n")
    }

    /// Short hex digest of the rendered sections, for error messages.
    pub fn digest(&self) -> String {
        crate::util::digest_hex(self.render().as_bytes())[..12].to_string()
    }

    fn with_repair(&self, reason: &str) -> PromptSpec {
        let mut next = self.clone();
        next.sections.push(Section {
            name: REPAIR_SECTION.to_string(),
            text: format!(
                "Your previous reply was rejected: {reason}\nReply again with only a JSON object in the required format."
            ),
        });
        next
    }
}

/// Name of the section appended when asking the model to repair its output.
pub const REPAIR_SECTION: &str = "Correction";

pub const SYSTEM_MESSAGE: &str =
    "You are a careful assistant. Reply with exactly one JSON object and nothing else.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// What a backend receives for one chat call.
#[derive(Debug, Clone)]
pub struct ChatRequest<'a> {
    pub spec: &'a PromptSpec,
    pub model: &'a str,
    pub messages: Vec<Message>,
}

#[derive(Debug, Clone)]
pub struct Completion {
    pub text: String,
    pub usage: Usage,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited (retry after {retry_after:?})")]
    RateLimited { retry_after: Option<Duration> },
    #[error("http status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("invalid response: {0}")]
    InvalidResponse(String),
    #[error("script: {0}")]
    Script(String),
    #[error("cassette: {0}")]
    Cassette(String),
}

impl BackendError {
    fn is_retryable(&self) -> bool {
        match self {
            BackendError::Transport(_) | BackendError::RateLimited { .. } => true,
            BackendError::Status { status, .. } => matches!(status, 408 | 500 | 502 | 503 | 504),
            _ => false,
        }
    }
}

#[async_trait]
pub trait Backend: Send + Sync {
    fn name(&self) -> &str;

    async fn complete(&self, request: &ChatRequest<'_>) -> Result<Completion, BackendError>;

    async fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError>;

    fn embedding_dimension(&self) -> usize;
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("unknown response schema {0:?}")]
    UnknownSchema(String),
    #[error("empty input")]
    EmptyInput,
    #[error("transport failed after {attempts} attempts: {source}")]
    Transport {
        attempts: u32,
        #[source]
        source: BackendError,
    },
    #[error("rate limited after {attempts} attempts (retry after {retry_after:?})")]
    RateLimited {
        attempts: u32,
        retry_after: Option<Duration>,
    },
    #[error(transparent)]
    Backend(BackendError),
    #[error("{role_tag}: response failed schema {schema}: {message}")]
    Schema {
        role_tag: String,
        schema: String,
        message: String,
    },
    #[error("{role_tag}: response rejected after repair: {reason}")]
    Rejected { role_tag: String, reason: String },
    #[error("embedding dimension {got} differs from configured {expected}")]
    Dimension { expected: usize, got: usize },
}

/// Validated (or rejected) result of one chat call.
#[derive(Debug, Clone)]
pub struct StructuredResponse {
    pub role_tag: String,
    pub schema: String,
    pub raw_text: String,
    /// Present iff `raw_text` validated against the response schema.
    pub parsed: Result<Value, String>,
    pub usage: Usage,
    /// Backend calls made, including repairs and transport retries.
    pub attempts: u32,
}

impl StructuredResponse {
    pub fn into_value(self) -> Result<Value, GatewayError> {
        self.parsed.map_err(|message| GatewayError::Schema {
            role_tag: self.role_tag,
            schema: self.schema,
            message,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatewayConfig {
    pub default_model: String,
    /// Per-role_tag model override.
    pub model_overrides: BTreeMap<String, String>,
    pub max_in_flight: usize,
    pub schema_repair_retries: u32,
    pub transport_retries: u32,
    pub backoff_base: Duration,
    pub backoff_max: Duration,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            default_model: "default".to_string(),
            model_overrides: BTreeMap::new(),
            max_in_flight: 16,
            schema_repair_retries: 2,
            transport_retries: 3,
            backoff_base: Duration::from_millis(250),
            backoff_max: Duration::from_secs(8),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallCounts {
    pub chat: u32,
    pub embed: u32,
}

#[derive(Debug, Default)]
struct Counter {
    chat: AtomicU32,
    embed: AtomicU32,
}

struct Shared {
    backend: Arc<dyn Backend>,
    config: GatewayConfig,
    schemas: BTreeMap<String, ResponseSchema>,
    permits: Semaphore,
    in_flight: AtomicUsize,
    peak_in_flight: AtomicUsize,
}

/// Cheap-to-clone handle. Clones share the backend, limiter and counters;
/// [`Gateway::scoped`] creates a handle with fresh counters.
#[derive(Clone)]
pub struct Gateway {
    shared: Arc<Shared>,
    counter: Arc<Counter>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("backend", &self.shared.backend.name())
            .field("counts", &self.counts())
            .finish()
    }
}

impl Gateway {
    pub fn new(backend: Arc<dyn Backend>, config: GatewayConfig) -> Self {
        Self::with_schemas(backend, config, schema::builtin_schemas())
    }

    pub fn with_schemas(
        backend: Arc<dyn Backend>,
        config: GatewayConfig,
        schemas: BTreeMap<String, ResponseSchema>,
    ) -> Self {
        let permits = Semaphore::new(config.max_in_flight.max(1));
        Self {
            shared: Arc::new(Shared {
                backend,
                config,
                schemas,
                permits,
                in_flight: AtomicUsize::new(0),
                peak_in_flight: AtomicUsize::new(0),
            }),
            counter: Arc::default(),
        }
    }

    /// Same backend and limiter, independent call counters.
    pub fn scoped(&self) -> Gateway {
        Gateway {
            shared: self.shared.clone(),
            counter: Arc::default(),
        }
    }

    pub fn counts(&self) -> CallCounts {
        CallCounts {
            chat: self.counter.chat.load(Ordering::SeqCst),
            embed: self.counter.embed.load(Ordering::SeqCst),
        }
    }

    pub fn backend_name(&self) -> &str {
        self.shared.backend.name()
    }

    pub fn embedding_dimension(&self) -> usize {
        self.shared.backend.embedding_dimension()
    }

    /// Highest number of concurrent backend requests observed so far.
    pub fn peak_in_flight(&self) -> usize {
        self.shared.peak_in_flight.load(Ordering::SeqCst)
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.shared.config
    }

    fn model_for(&self, role_tag: &str) -> &str {
        let cfg = &self.shared.config;
        cfg.model_overrides
            .get(role_tag)
            .unwrap_or(&cfg.default_model)
    }

    /// One structured generation. Schema-invalid output is retried with a
    /// repair instruction up to `schema_repair_retries` times; after that the
    /// response is returned with `parsed` set to the parse error.
    pub async fn chat(&self, spec: &PromptSpec) -> Result<StructuredResponse, GatewayError> {
        let schema = self
            .shared
            .schemas
            .get(&spec.response_schema)
            .ok_or_else(|| GatewayError::UnknownSchema(spec.response_schema.clone()))?;
        let mut current = spec.clone();
        let mut attempts = 0;
        let mut usage = Usage::default();
        let mut round = 0;
        loop {
            let (completion, made) = self.complete_with_retries(&current).await?;
            attempts += made;
            usage.prompt_tokens += completion.usage.prompt_tokens;
            usage.completion_tokens += completion.usage.completion_tokens;
            let parsed =
                extract_json(&completion.text).and_then(|v| schema.validate(&v).map(|_| v));
            match parsed {
                Ok(v) => {
                    return Ok(StructuredResponse {
                        role_tag: spec.role_tag.clone(),
                        schema: schema.name.clone(),
                        raw_text: completion.text,
                        parsed: Ok(v),
                        usage,
                        attempts,
                    })
                }
                Err(reason) if round < self.shared.config.schema_repair_retries => {
                    tracing::warn!(role_tag = %spec.role_tag, %reason, "schema-invalid response, asking for repair");
                    current = spec.with_repair(&reason);
                    round += 1;
                }
                Err(reason) => {
                    return Ok(StructuredResponse {
                        role_tag: spec.role_tag.clone(),
                        schema: schema.name.clone(),
                        raw_text: completion.text,
                        parsed: Err(reason),
                        usage,
                        attempts,
                    })
                }
            }
        }
    }

    /// Chat plus a domain check. A rejected value triggers `repair_retries`
    /// further calls carrying the rejection reason, then fails.
    pub async fn chat_checked<T>(
        &self,
        spec: &PromptSpec,
        repair_retries: u32,
        mut check: impl FnMut(Value) -> Result<T, String>,
    ) -> Result<T, GatewayError> {
        let mut current = spec.clone();
        let mut round = 0;
        loop {
            let value = self.chat(&current).await?.into_value()?;
            match check(value) {
                Ok(t) => return Ok(t),
                Err(reason) if round < repair_retries => {
                    tracing::warn!(role_tag = %spec.role_tag, %reason, "response rejected, asking for repair");
                    current = spec.with_repair(&reason);
                    round += 1;
                }
                Err(reason) => {
                    return Err(GatewayError::Rejected {
                        role_tag: spec.role_tag.clone(),
                        reason,
                    })
                }
            }
        }
    }

    async fn complete_with_retries(
        &self,
        spec: &PromptSpec,
    ) -> Result<(Completion, u32), GatewayError> {
        let request = ChatRequest {
            spec,
            model: self.model_for(&spec.role_tag),
            messages: vec![
                Message {
                    role: "system".into(),
                    content: SYSTEM_MESSAGE.into(),
                },
                Message {
                    role: "user".into(),
                    content: spec.render(),
                },
            ],
        };
        let mut attempts = 0;
        loop {
            attempts += 1;
            self.counter.chat.fetch_add(1, Ordering::SeqCst);
            let result = {
                let _permit = self.acquire().await;
                self.shared.backend.complete(&request).await
            };
            match result {
                Ok(c) => return Ok((c, attempts)),
                Err(e) => self.backoff_or_fail(e, attempts).await?,
            }
        }
    }

    /// Embeds `text` with the backend's fixed dimension.
    pub async fn embed(&self, text: &str) -> Result<Vec<f64>, GatewayError> {
        if text.trim().is_empty() {
            return Err(GatewayError::EmptyInput);
        }
        let expected = self.embedding_dimension();
        let mut attempts = 0;
        loop {
            attempts += 1;
            self.counter.embed.fetch_add(1, Ordering::SeqCst);
            let result = {
                let _permit = self.acquire().await;
                self.shared.backend.embed(text).await
            };
            match result {
                Ok(v) if v.len() == expected => return Ok(v),
                Ok(v) => {
                    return Err(GatewayError::Dimension {
                        expected,
                        got: v.len(),
                    })
                }
                Err(e) => self.backoff_or_fail(e, attempts).await?,
            }
        }
    }

    async fn acquire(&self) -> InFlight<'_> {
        let permit = self
            .shared
            .permits
            .acquire()
            .await
            .expect("gateway semaphore is never closed");
        let now = self.shared.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.shared.peak_in_flight.fetch_max(now, Ordering::SeqCst);
        InFlight {
            _permit: permit,
            counter: &self.shared.in_flight,
        }
    }

    async fn backoff_or_fail(&self, err: BackendError, attempts: u32) -> Result<(), GatewayError> {
        let cfg = &self.shared.config;
        if !err.is_retryable() {
            return Err(GatewayError::Backend(err));
        }
        if attempts > cfg.transport_retries {
            return Err(match err {
                BackendError::RateLimited { retry_after } => GatewayError::RateLimited {
                    attempts,
                    retry_after,
                },
                other => GatewayError::Transport {
                    attempts,
                    source: other,
                },
            });
        }
        let exp = cfg
            .backoff_base
            .saturating_mul(1u32 << (attempts - 1).min(16))
            .min(cfg.backoff_max);
        let wait = match &err {
            BackendError::RateLimited {
                retry_after: Some(d),
            } => (*d).min(cfg.backoff_max),
            _ => exp,
        };
        tracing::warn!(error = %err, attempt = attempts, ?wait, "retrying backend call");
        tokio::time::sleep(wait).await;
        Ok(())
    }
}

struct InFlight<'a> {
    _permit: tokio::sync::SemaphorePermit<'a>,
    counter: &'a AtomicUsize,
}

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.counter.fetch_sub(1, Ordering::SeqCst);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;
    use std::sync::Mutex;

    /// Backend that replays a fixed queue of results.
    struct Queue {
        items: Mutex<Vec<Result<String, BackendError>>>,
        seen: Mutex<Vec<String>>,
    }

    impl Queue {
        fn new(items: Vec<Result<&str, BackendError>>) -> Arc<Self> {
            let mut items: Vec<_> = items.into_iter().map(|r| r.map(str::to_string)).collect();
            items.reverse();
            Arc::new(Self {
                items: Mutex::new(items),
                seen: Mutex::default(),
            })
        }
    }

    #[async_trait]
    impl Backend for Queue {
        fn name(&self) -> &str {
            "queue"
        }
        async fn complete(&self, r: &ChatRequest<'_>) -> Result<Completion, BackendError> {
            self.seen
                .lock()
                .unwrap()
                .push(r.messages[1].content.clone());
            let next = self.items.lock().unwrap().pop().expect("queue exhausted");
            next.map(|text| Completion {
                text,
                usage: Usage::default(),
            })
        }
        async fn embed(&self, _text: &str) -> Result<Vec<f64>, BackendError> {
            Ok(vec![1.0, 0.0])
        }
        fn embedding_dimension(&self) -> usize {
            2
        }
    }

    fn fast() -> GatewayConfig {
        GatewayConfig {
            backoff_base: Duration::from_millis(1),
            backoff_max: Duration::from_millis(2),
            ..Default::default()
        }
    }

    fn summary_spec() -> PromptSpec {
        PromptSpec::new("rolling_summary", "summary").section("Scene", "they talked")
    }

    #[tokio::test]
    async fn unknown_schema_is_config_error() {
        let gw = Gateway::new(Queue::new(vec![]), fast());
        let err = gw
            .chat(&PromptSpec::new("decision", "no_such_schema"))
            .await
            .unwrap_err();
        assert!(matches!(err, GatewayError::UnknownSchema(s) if s == "no_such_schema"));
        assert_eq!(gw.counts().chat, 0);
    }

    #[tokio::test]
    async fn schema_repair_then_success() {
        let q = Queue::new(vec![Ok("not json"), Ok(r#"{"summary": "fine"}"#)]);
        let gw = Gateway::new(q.clone(), fast());
        let resp = gw.chat(&summary_spec()).await.unwrap();
        assert_eq!(resp.parsed.unwrap(), json!({"summary": "fine"}));
        assert_eq!(resp.attempts, 2);
        let seen = q.seen.lock().unwrap();
        assert!(seen[1].ends_with("Reply again with only a JSON object in the required format."));
        assert!(seen[1].contains("Correction:\nYour previous reply was rejected"));
    }

    #[tokio::test]
    async fn schema_failure_after_budget_returns_parse_error() {
        let q = Queue::new(vec![Ok("{}"), Ok("{}"), Ok("{}")]);
        let gw = Gateway::new(q, fast());
        let resp = gw.chat(&summary_spec()).await.unwrap();
        assert_eq!(resp.attempts, 3);
        assert!(resp.parsed.is_err());
        assert!(matches!(
            resp.into_value(),
            Err(GatewayError::Schema { .. })
        ));
    }

    #[tokio::test]
    async fn transport_retries_then_fails() {
        let e = || Err(BackendError::Transport("reset".into()));
        let q = Queue::new(vec![e(), e(), e(), e()]);
        let gw = Gateway::new(q, fast());
        match gw.chat(&summary_spec()).await.unwrap_err() {
            GatewayError::Transport { attempts, .. } => assert_eq!(attempts, 4),
            other => panic!("{other:?}"),
        }
        assert_eq!(gw.counts().chat, 4);
    }

    #[tokio::test]
    async fn rate_limit_carries_backoff_metadata() {
        let e = || {
            Err(BackendError::RateLimited {
                retry_after: Some(Duration::from_millis(1)),
            })
        };
        let gw = Gateway::new(Queue::new(vec![e(), e(), e(), e()]), fast());
        match gw.chat(&summary_spec()).await.unwrap_err() {
            GatewayError::RateLimited { retry_after, .. } => {
                assert_eq!(retry_after, Some(Duration::from_millis(1)))
            }
            other => panic!("{other:?}"),
        }
    }

    #[tokio::test]
    async fn retryable_status_recovers() {
        let q = Queue::new(vec![
            Err(BackendError::Status {
                status: 503,
                body: "busy".into(),
            }),
            Ok(r#"{"summary": "s"}"#),
        ]);
        let gw = Gateway::new(q, fast());
        assert_eq!(gw.chat(&summary_spec()).await.unwrap().attempts, 2);
        let q = Queue::new(vec![Err(BackendError::Status {
            status: 400,
            body: "bad".into(),
        })]);
        let gw = Gateway::new(q, fast());
        assert!(matches!(
            gw.chat(&summary_spec()).await.unwrap_err(),
            GatewayError::Backend(_)
        ));
    }

    #[tokio::test]
    async fn checked_chat_repairs_once_then_rejects() {
        let q = Queue::new(vec![Ok(r#"{"summary": "a"}"#), Ok(r#"{"summary": "b"}"#)]);
        let gw = Gateway::new(q, fast());
        let err = gw
            .chat_checked(&summary_spec(), 1, |_| Err::<(), _>("too short".into()))
            .await
            .unwrap_err();
        assert!(matches!(err, GatewayError::Rejected { reason, .. } if reason == "too short"));
        assert_eq!(gw.counts().chat, 2);
    }

    #[tokio::test]
    async fn embed_rejects_empty_input() {
        let gw = Gateway::new(Queue::new(vec![]), fast());
        assert!(matches!(
            gw.embed("  ").await,
            Err(GatewayError::EmptyInput)
        ));
        assert_eq!(gw.embed("x").await.unwrap(), vec![1.0, 0.0]);
        assert_eq!(gw.counts().embed, 1);
    }

    #[tokio::test]
    async fn scoped_counters_are_independent() {
        let q = Queue::new(vec![Ok(r#"{"summary": "a"}"#), Ok(r#"{"summary": "b"}"#)]);
        let gw = Gateway::new(q, fast());
        let a = gw.scoped();
        let b = gw.scoped();
        a.chat(&summary_spec()).await.unwrap();
        a.chat(&summary_spec()).await.unwrap();
        assert_eq!(a.counts().chat, 2);
        assert_eq!(b.counts().chat, 0);
        assert_eq!(gw.counts().chat, 0);
    }

    #[test]
    fn render_preserves_section_order() {
        let spec = PromptSpec::new("x", "summary")
            .section("Zeta", "last letter")
            .section("Alpha", "first letter");
        assert_eq!(spec.render(), "Zeta:\nlast letter\n\nAlpha:\nfirst letter");
    }
}
