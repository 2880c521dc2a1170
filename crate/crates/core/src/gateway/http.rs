//! Chat-completions wire protocol backend with optional cassette recording.
//!
//! Requests go to `POST {base}/chat/completions` and `POST {base}/embeddings`.
//! A cassette directory maps the SHA-256 of each request (endpoint plus
//! canonical JSON body) to the verbatim response body, so recorded sessions
//! can be replayed without a server.

use std::path::PathBuf;
use std::time::Duration;

use async_trait::async_trait;
use serde_json::{json, Value};

use super::{Backend, BackendError, ChatRequest, Completion, Usage};
use crate::util::digest_hex;

pub const ENV_API_BASE: &str = "RELATE_API_BASE";
pub const ENV_API_KEY: &str = "RELATE_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CassetteMode {
    /// Forward to the server and store every successful body.
    Record,
    /// Serve stored bodies only; a missing recording is an error.
    Replay,
}

#[derive(Debug, Clone)]
pub struct HttpConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub embedding_model: String,
    pub embedding_dimension: usize,
    pub timeout: Duration,
    pub cassette: Option<(PathBuf, CassetteMode)>,
}

impl HttpConfig {
    pub fn new(base_url: &str, embedding_model: &str, embedding_dimension: usize) -> Self {
        Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key: None,
            embedding_model: embedding_model.to_string(),
            embedding_dimension,
            timeout: Duration::from_secs(120),
            cassette: None,
        }
    }

    /// Base URL from `RELATE_API_BASE`, bearer token from `RELATE_API_KEY`.
    pub fn from_env(embedding_model: &str, embedding_dimension: usize) -> Result<Self, String> {
        let base = std::env::var(ENV_API_BASE).map_err(|_| format!("{ENV_API_BASE} is not set"))?;
        let mut cfg = Self::new(&base, embedding_model, embedding_dimension);
        cfg.api_key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
        Ok(cfg)
    }

    pub fn with_cassette(mut self, dir: impl Into<PathBuf>, mode: CassetteMode) -> Self {
        self.cassette = Some((dir.into(), mode));
        self
    }
}

pub struct HttpBackend {
    client: reqwest::Client,
    config: HttpConfig,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, BackendError> {
        let client = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self { client, config })
    }

    /// Cassette key for a request.
    pub fn request_digest(endpoint: &str, body: &Value) -> String {
        digest_hex(format!("POST {endpoint}\n{body}").as_bytes())
    }

    async fn post(&self, endpoint: &str, body: Value) -> Result<String, BackendError> {
        let digest = Self::request_digest(endpoint, &body);
        if let Some((dir, CassetteMode::Replay)) = &self.config.cassette {
            let path = dir.join(format!("{digest}.json"));
            return tokio::fs::read_to_string(&path).await.map_err(|e| {
                BackendError::Cassette(format!("no recording {}: {e}", path.display()))
            });
        }
        let url = format!("{}{endpoint}", self.config.base_url);
        let mut req = self.client.post(&url).json(&body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .await
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        if status.as_u16() == 429 {
            let retry_after = resp
                .headers()
                .get("retry-after")
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<f64>().ok())
                .filter(|s| s.is_finite() && *s >= 0.0)
                .map(Duration::from_secs_f64);
            return Err(BackendError::RateLimited { retry_after });
        }
        let text = resp
            .text()
            .await
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::Status {
                status: status.as_u16(),
                body: text,
            });
        }
        if let Some((dir, CassetteMode::Record)) = &self.config.cassette {
            tokio::fs::create_dir_all(dir)
                .await
                .map_err(|e| BackendError::Cassette(e.to_string()))?;
            tokio::fs::write(dir.join(format!("{digest}.json")), &text)
                .await
                .map_err(|e| BackendError::Cassette(e.to_string()))?;
        }
        Ok(text)
    }

    /// Raw response body of a chat call, exactly as received or recorded.
    pub async fn chat_body(&self, request: &ChatRequest<'_>) -> Result<String, BackendError> {
        let mut body = json!({
            "model": request.model,
            "messages": request.messages,
            "temperature": request.spec.temperature,
        });
        if let Some(seed) = request.spec.seed {
            body["seed"] = json!(seed);
        }
        self.post("/chat/completions", body).await
    }
}

fn parse_chat_body(body: &str) -> Result<Completion, BackendError> {
    let v: Value = serde_json::from_str(body)
        .map_err(|e| BackendError::InvalidResponse(format!("body is not JSON: {e}")))?;
    let text = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| BackendError::InvalidResponse("missing choices[0].message.content".into()))?
        .to_string();
    let usage = Usage {
        prompt_tokens: v
            .pointer("/usage/prompt_tokens")
            .and_then(Value::as_u64)
            .unwrap_or(0),
        completion_tokens: v
            .pointer("/usage/completion_tokens")
            .and_then(Value::as_u64)
            .unwrap_or(0),
    };
    Ok(Completion { text, usage })
}

#[async_trait]
impl Backend for HttpBackend {
    fn name(&self) -> &str {
        "http"
    }

    async fn complete(&self, request: &ChatRequest<'_>) -> Result<Completion, BackendError> {
        let body = self.chat_body(request).await?;
        parse_chat_body(&body)
    }

    async fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        let body = self
            .post(
                "/embeddings",
                json!({"model": self.config.embedding_model, "input": text}),
            )
            .await?;
        let v: Value = serde_json::from_str(&body)
            .map_err(|e| BackendError::InvalidResponse(format!("body is not JSON: {e}")))?;
        v.pointer("/data/0/embedding")
            .and_then(Value::as_array)
            .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<_>>>())
            .ok_or_else(|| BackendError::InvalidResponse("missing data[0].embedding".into()))
    }

    fn embedding_dimension(&self) -> usize {
        self.config.embedding_dimension
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_chat_body() {
        let c = parse_chat_body(
            r#"{"choices":[{"message":{"role":"assistant","content":"{\"a\":1}"}}],"usage":{"prompt_tokens":5,"completion_tokens":2}}"#,
        )
        .unwrap();
        assert_eq!(c.text, "{\"a\":1}");
        assert_eq!(c.usage.prompt_tokens, 5);
        assert!(parse_chat_body(r#"{"choices":[]}"#).is_err());
    }

    #[test]
    fn digest_separates_endpoints() {
        let body = json!({"model": "m", "input": "x"});
        assert_ne!(
            HttpBackend::request_digest("/embeddings", &body),
            HttpBackend::request_digest("/chat/completions", &body)
        );
    }
}
