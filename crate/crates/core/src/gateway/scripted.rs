//! Deterministic playback backend for tests and fixtures.

use std::sync::Mutex;

use async_trait::async_trait;
use serde::Deserialize;
use serde_json::Value;

use super::embedder::HashEmbedder;
use super::{Backend, BackendError, ChatRequest, Completion, PromptSpec, Usage};

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum Matcher {
    /// Substring of one named section.
    Section {
        section: String,
        contains: String,
    },
    /// Substring anywhere in the rendered prompt.
    Contains {
        contains: String,
    },
    Any {},
}

impl Matcher {
    pub fn any() -> Self {
        Matcher::Any {}
    }

    pub fn contains(needle: &str) -> Self {
        Matcher::Contains {
            contains: needle.to_string(),
        }
    }

    pub fn section(name: &str, needle: &str) -> Self {
        Matcher::Section {
            section: name.to_string(),
            contains: needle.to_string(),
        }
    }

    fn matches(&self, spec: &PromptSpec) -> bool {
        match self {
            Matcher::Any {} => true,
            Matcher::Contains { contains } => spec.render().contains(contains.as_str()),
            Matcher::Section { section, contains } => spec
                .get(section)
                .is_some_and(|t| t.contains(contains.as_str())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ScriptRule {
    pub role_tag: String,
    #[serde(default = "Matcher::any")]
    pub matcher: Matcher,
    /// Raw model output. JSON values in script files are serialized.
    #[serde(deserialize_with = "response_text")]
    pub response: String,
    /// Repeating rules are never consumed.
    #[serde(default)]
    pub repeat: bool,
}

fn response_text<'de, D: serde::Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    Ok(match Value::deserialize(d)? {
        Value::String(s) => s,
        other => other.to_string(),
    })
}

impl ScriptRule {
    pub fn json(role_tag: &str, response: Value) -> Self {
        Self::raw(role_tag, &response.to_string())
    }

    pub fn raw(role_tag: &str, response: &str) -> Self {
        Self {
            role_tag: role_tag.to_string(),
            matcher: Matcher::any(),
            response: response.to_string(),
            repeat: false,
        }
    }

    pub fn when(mut self, matcher: Matcher) -> Self {
        self.matcher = matcher;
        self
    }

    pub fn repeating(mut self) -> Self {
        self.repeat = true;
        self
    }
}

/// One observed chat call.
#[derive(Debug, Clone)]
pub struct ScriptedCall {
    pub role_tag: String,
    pub prompt: String,
    pub spec: PromptSpec,
}

/// Replays scripted responses in order.
///
/// A call consumes the first unused rule whose `role_tag` equals the call's
/// and whose matcher accepts the prompt. Embeddings come from a
/// [`HashEmbedder`].
pub struct ScriptedBackend {
    rules: Mutex<Vec<(ScriptRule, bool)>>,
    calls: Mutex<Vec<ScriptedCall>>,
    embedder: HashEmbedder,
}

impl ScriptedBackend {
    pub fn new(rules: Vec<ScriptRule>, embedding_dimension: usize) -> Self {
        Self {
            rules: Mutex::new(rules.into_iter().map(|r| (r, false)).collect()),
            calls: Mutex::default(),
            embedder: HashEmbedder::new(embedding_dimension, 0),
        }
    }

    /// Parses a JSON array of rules.
    pub fn from_json(text: &str, embedding_dimension: usize) -> Result<Self, String> {
        let rules: Vec<ScriptRule> =
            serde_json::from_str(text).map_err(|e| format!("malformed script: {e}"))?;
        if let Some(i) = rules.iter().position(|r| r.role_tag.trim().is_empty()) {
            return Err(format!("rule {i} has an empty role_tag"));
        }
        Ok(Self::new(rules, embedding_dimension))
    }

    pub fn push(&self, rule: ScriptRule) {
        self.rules.lock().unwrap().push((rule, false));
    }

    pub fn calls(&self) -> Vec<ScriptedCall> {
        self.calls.lock().unwrap().clone()
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().unwrap().len()
    }

    pub fn calls_for(&self, role_tag: &str) -> usize {
        self.calls
            .lock()
            .unwrap()
            .iter()
            .filter(|c| c.role_tag == role_tag)
            .count()
    }

    /// Unconsumed, non-repeating rules.
    pub fn remaining(&self) -> usize {
        self.rules
            .lock()
            .unwrap()
            .iter()
            .filter(|(r, used)| !used && !r.repeat)
            .count()
    }

    fn next_response(&self, spec: &PromptSpec) -> Result<String, BackendError> {
        let mut rules = self.rules.lock().unwrap();
        let mut saw_role = false;
        let mut saw_unused = false;
        for (rule, used) in rules.iter_mut() {
            if rule.role_tag != spec.role_tag {
                continue;
            }
            saw_role = true;
            if *used {
                continue;
            }
            saw_unused = true;
            if rule.matcher.matches(spec) {
                if !rule.repeat {
                    *used = true;
                }
                return Ok(rule.response.clone());
            }
        }
        Err(BackendError::Script(if saw_role && !saw_unused {
            format!("script exhausted for role_tag {:?}", spec.role_tag)
        } else {
            format!(
                "no rule matched role_tag {:?} (sections digest {})",
                spec.role_tag,
                spec.digest()
            )
        }))
    }
}

#[async_trait]
impl Backend for ScriptedBackend {
    fn name(&self) -> &str {
        "scripted"
    }

    async fn complete(&self, request: &ChatRequest<'_>) -> Result<Completion, BackendError> {
        self.calls.lock().unwrap().push(ScriptedCall {
            role_tag: request.spec.role_tag.clone(),
            prompt: request.spec.render(),
            spec: request.spec.clone(),
        });
        let text = self.next_response(request.spec)?;
        Ok(Completion {
            text,
            usage: Usage::default(),
        })
    }

    async fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        Ok(self.embedder.embed(text))
    }

    fn embedding_dimension(&self) -> usize {
        self.embedder.dimension()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Gateway, GatewayConfig, GatewayError};
    use serde_json::json;
    use std::sync::Arc;

    fn state_spec(scene: &str) -> PromptSpec {
        PromptSpec::new("state_inference", "summary").section("Scene", scene)
    }

    #[tokio::test]
    async fn replays_verbatim_then_exhausts() {
        let backend = Arc::new(ScriptedBackend::new(
            vec![ScriptRule::json("state_inference", json!({"summary": "x"}))],
            8,
        ));
        let gw = Gateway::new(backend.clone(), GatewayConfig::default());
        let first = gw.chat(&state_spec("a")).await.unwrap();
        assert_eq!(first.raw_text, r#"{"summary":"x"}"#);
        let err = gw.chat(&state_spec("a")).await.unwrap_err();
        assert!(err.to_string().contains("exhausted"), "{err}");
        assert_eq!(backend.call_count(), 2);
    }

    #[tokio::test]
    async fn matcher_only_fires_on_matching_prompts() {
        let backend = Arc::new(ScriptedBackend::new(
            vec![
                ScriptRule::json("state_inference", json!({"summary": "talk"}))
                    .when(Matcher::section("Scene", "exclusivity")),
            ],
            8,
        ));
        let gw = Gateway::new(backend.clone(), GatewayConfig::default());
        let err = gw.chat(&state_spec("a dinner")).await.unwrap_err();
        match err {
            GatewayError::Backend(BackendError::Script(msg)) => {
                assert!(msg.contains("no rule matched role_tag \"state_inference\""));
                assert!(msg.contains("sections digest"));
            }
            other => panic!("{other:?}"),
        }
        let ok = gw.chat(&state_spec("an exclusivity talk")).await.unwrap();
        assert_eq!(ok.parsed.unwrap(), json!({"summary": "talk"}));
        assert_eq!(backend.remaining(), 0);
    }

    #[tokio::test]
    async fn repeating_rules_are_not_consumed() {
        let backend = Arc::new(ScriptedBackend::new(
            vec![ScriptRule::json("rolling_summary", json!({"summary": "s"})).repeating()],
            8,
        ));
        let gw = Gateway::new(backend.clone(), GatewayConfig::default());
        for _ in 0..3 {
            gw.chat(&PromptSpec::new("rolling_summary", "summary"))
                .await
                .unwrap();
        }
        assert_eq!(backend.calls_for("rolling_summary"), 3);
    }

    #[test]
    fn parses_script_files() {
        let b = ScriptedBackend::from_json(
            r#"[{"role_tag": "decision", "response": {"action": "o1", "reasoning": "r"}},
                {"role_tag": "options", "matcher": {"section": "Scene", "contains": "move"}, "response": "raw", "repeat": true}]"#,
            4,
        )
        .unwrap();
        assert_eq!(b.remaining(), 1);
        assert!(ScriptedBackend::from_json("{", 4).is_err());
        assert!(ScriptedBackend::from_json(r#"[{"role_tag": "", "response": "x"}]"#, 4).is_err());
    }
}
