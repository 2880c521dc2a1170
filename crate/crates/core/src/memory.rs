//! Three-layer agent memory with hybrid semantic + affective retrieval.
//!
//! - identity: preloaded stable traits, never mutated during a run;
//! - simulation: episodic entries appended as scenes unfold;
//! - scene: the current scene's events, injected inline and cleared between
//!   scenes. Retrieval normally skips this layer.
//!
//! Entries are scored against a context by
//! `cos(sem(m), sem(c)) + λ · cos(aff(m), a)`.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain::{AffectVector, MemoryEntry, MemoryLayer, Persona, AFFECT_DIM, AFFECT_NAMES};
use crate::gateway::schema::names;
use crate::gateway::{Gateway, GatewayError, PromptSpec};
use crate::prompts;
use crate::util::digest_hex;

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_LAMBDA: f64 = 0.5;

#[derive(Debug, thiserror::Error)]
pub enum MemoryError {
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("identity entries must use the identity layer (entry {0})")]
    NotIdentity(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Cosine similarity; zero vectors give 0.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

pub fn hybrid_similarity(
    entry: &MemoryEntry,
    context_embedding: &[f64],
    affect: &AffectVector,
    lambda: f64,
) -> Result<f64, MemoryError> {
    if entry.semantic_embedding.len() != context_embedding.len() {
        return Err(MemoryError::Dimension {
            expected: entry.semantic_embedding.len(),
            got: context_embedding.len(),
        });
    }
    let sem = cosine(&entry.semantic_embedding, context_embedding);
    let aff = cosine(entry.affect_embedding.values(), affect.values());
    Ok(sem + lambda * aff)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryStore {
    embedding_dimension: usize,
    entries: Vec<MemoryEntry>,
    next_seq: u64,
}

impl MemoryStore {
    pub fn new(embedding_dimension: usize) -> Self {
        Self {
            embedding_dimension,
            entries: Vec::new(),
            next_seq: 0,
        }
    }

    /// A store preloaded with identity entries.
    pub fn with_identity(
        embedding_dimension: usize,
        identity: Vec<MemoryEntry>,
    ) -> Result<Self, MemoryError> {
        let mut store = Self::new(embedding_dimension);
        for e in identity {
            if e.layer != MemoryLayer::Identity {
                return Err(MemoryError::NotIdentity(e.id));
            }
            store.check_dim(&e.semantic_embedding)?;
            store.entries.push(e);
        }
        Ok(store)
    }

    /// Embeds each text and preloads it as an identity entry.
    pub async fn preload_identity(
        gateway: &Gateway,
        cache: &mut AffectCache,
        texts: &[String],
    ) -> Result<Self, MemoryError> {
        let mut entries = Vec::with_capacity(texts.len());
        for (i, text) in texts.iter().enumerate() {
            entries.push(MemoryEntry {
                id: format!("id-{i:03}"),
                layer: MemoryLayer::Identity,
                text: text.clone(),
                semantic_embedding: gateway.embed(text).await?,
                affect_embedding: affect_embed(gateway, cache, text).await?.0,
                created_at_scene: None,
            });
        }
        Self::with_identity(gateway.embedding_dimension(), entries)
    }

    pub fn embedding_dimension(&self) -> usize {
        self.embedding_dimension
    }

    pub fn entries(&self) -> &[MemoryEntry] {
        &self.entries
    }

    pub fn layer(&self, layer: MemoryLayer) -> impl Iterator<Item = &MemoryEntry> {
        self.entries.iter().filter(move |e| e.layer == layer)
    }

    pub fn layer_len(&self, layer: MemoryLayer) -> usize {
        self.layer(layer).count()
    }

    fn check_dim(&self, v: &[f64]) -> Result<(), MemoryError> {
        if v.len() != self.embedding_dimension {
            return Err(MemoryError::Dimension {
                expected: self.embedding_dimension,
                got: v.len(),
            });
        }
        Ok(())
    }

    fn append(
        &mut self,
        layer: MemoryLayer,
        scene_index: u32,
        text: &str,
        semantic_embedding: Vec<f64>,
        affect_embedding: AffectVector,
    ) -> Result<&MemoryEntry, MemoryError> {
        self.check_dim(&semantic_embedding)?;
        let prefix = match layer {
            MemoryLayer::Simulation => "sim",
            MemoryLayer::Scene => "scn",
            MemoryLayer::Identity => unreachable!("identity entries are preloaded"),
        };
        let id = format!("{prefix}-{:04}", self.next_seq);
        self.next_seq += 1;
        self.entries.push(MemoryEntry {
            id,
            layer,
            text: text.to_string(),
            semantic_embedding,
            affect_embedding,
            created_at_scene: Some(scene_index),
        });
        Ok(self.entries.last().expect("just pushed"))
    }

    /// Drops the short-term scene layer.
    pub fn clear_scene(&mut self) {
        self.entries.retain(|e| e.layer != MemoryLayer::Scene);
    }

    /// Scene-layer texts in insertion order.
    pub fn scene_texts(&self) -> Vec<&str> {
        self.layer(MemoryLayer::Scene)
            .map(|e| e.text.as_str())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredMemory {
    pub entry: MemoryEntry,
    pub score: f64,
}

/// Top-k memories, scores non-increasing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub entries: Vec<ScoredMemory>,
}

impl RetrievalResult {
    pub fn ids(&self) -> Vec<String> {
        self.entries.iter().map(|s| s.entry.id.clone()).collect()
    }
}

/// Rank order: higher score, then more recent scene (identity entries are
/// oldest), then smaller id.
fn rank(a: (&MemoryEntry, f64), b: (&MemoryEntry, f64)) -> Ordering {
    b.1.total_cmp(&a.1)
        .then_with(|| b.0.created_at_scene.cmp(&a.0.created_at_scene))
        .then_with(|| a.0.id.cmp(&b.0.id))
}

/// Scores every entry of `layers` against a pre-computed context embedding
/// and keeps the best `k`.
pub fn rank_top_k(
    store: &MemoryStore,
    context_embedding: &[f64],
    affect: &AffectVector,
    k: usize,
    lambda: f64,
    layers: &[MemoryLayer],
) -> Result<RetrievalResult, MemoryError> {
    if k == 0 {
        return Err(MemoryError::InvalidK);
    }
    store.check_dim(context_embedding)?;
    let mut best: Vec<(&MemoryEntry, f64)> = Vec::with_capacity(k + 1);
    for entry in store.entries.iter().filter(|e| layers.contains(&e.layer)) {
        let score = hybrid_similarity(entry, context_embedding, affect, lambda)?;
        if best.len() == k && rank((entry, score), best[k - 1]) != Ordering::Less {
            continue;
        }
        let at = best.partition_point(|held| rank(*held, (entry, score)) == Ordering::Less);
        best.insert(at, (entry, score));
        best.truncate(k);
    }
    Ok(RetrievalResult {
        entries: best
            .into_iter()
            .map(|(e, score)| ScoredMemory {
                entry: e.clone(),
                score,
            })
            .collect(),
    })
}

/// Embeds `context` once and returns the `k` best memories from `layers`.
pub async fn retrieve_top_k(
    gateway: &Gateway,
    store: &MemoryStore,
    context: &str,
    affect: &AffectVector,
    k: usize,
    lambda: f64,
    layers: &[MemoryLayer],
) -> Result<RetrievalResult, MemoryError> {
    if k == 0 {
        return Err(MemoryError::InvalidK);
    }
    if !store.entries.iter().any(|e| layers.contains(&e.layer)) {
        return Ok(RetrievalResult::default());
    }
    let c = gateway.embed(context).await?;
    rank_top_k(store, &c, affect, k, lambda, layers)
}

/// Affect vectors already computed for a text, keyed by text digest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AffectCache(BTreeMap<String, AffectVector>);

impl AffectCache {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Reads the eight named intensities from a model's `affect` object.
/// Missing dimensions become 0.0 and out-of-range values are clamped; both
/// produce warnings.
pub fn parse_affect(value: &Value, warnings: &mut Vec<String>) -> AffectVector {
    let obj = value.as_object();
    let mut raw = [0.0; AFFECT_DIM];
    for (i, name) in AFFECT_NAMES.iter().enumerate() {
        match obj.and_then(|o| o.get(*name)).and_then(Value::as_f64) {
            Some(v) => raw[i] = v,
            None => warnings.push(format!("affect dimension {name} missing; defaulted to 0.0")),
        }
    }
    let (vector, adjusted) = AffectVector::clamped(raw);
    for name in adjusted {
        warnings.push(format!("affect dimension {name} outside [0,1]; clamped"));
    }
    vector
}

/// Context-free affect scoring of a text. Cached by text digest, so the same
/// text always maps to the same vector within a cache.
pub async fn affect_embed(
    gateway: &Gateway,
    cache: &mut AffectCache,
    text: &str,
) -> Result<(AffectVector, Vec<String>), MemoryError> {
    if text.trim().is_empty() {
        return Err(MemoryError::Empty("text"));
    }
    let key = digest_hex(text.as_bytes());
    if let Some(v) = cache.0.get(&key) {
        return Ok((*v, Vec::new()));
    }
    let spec = PromptSpec::new(prompts::role::AFFECT_EMBEDDING, names::AFFECT_SCORES)
        .temperature(0.0)
        .section("Task", prompts::AFFECT_EMBEDDING_TASK)
        .section("Affect Dimensions", prompts::affect_dimensions())
        .section("Text", text)
        .section("Output", prompts::AFFECT_EMBEDDING_OUTPUT);
    let value = gateway.chat(&spec).await?.into_value()?;
    let mut warnings = Vec::new();
    let vector = parse_affect(&value["affect"], &mut warnings);
    for w in &warnings {
        tracing::warn!(target: "relate_sim::memory", "{w}");
    }
    cache.0.insert(key, vector);
    Ok((vector, warnings))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Appraisal {
    pub affect: AffectVector,
    pub internal_thought: String,
    pub warnings: Vec<String>,
}

/// Maps the current context to affect intensities plus an internal thought.
pub async fn appraise(
    gateway: &Gateway,
    persona: &Persona,
    history: &[String],
    context: &str,
    seed: Option<u64>,
) -> Result<Appraisal, MemoryError> {
    if context.trim().is_empty() {
        return Err(MemoryError::Empty("context"));
    }
    let history_text = if history.is_empty() {
        "(none)".to_string()
    } else {
        history.join("\n")
    };
    let spec = PromptSpec::new(prompts::role::APPRAISAL, names::APPRAISAL)
        .seed(seed)
        .section("Task", prompts::APPRAISAL_TASK)
        .section("Affect Dimensions", prompts::affect_dimensions())
        .section("Your Persona", persona.render())
        .section("Recent History", history_text)
        .section("Current Context", context)
        .section("Output", prompts::APPRAISAL_OUTPUT);
    let value = gateway.chat(&spec).await?.into_value()?;
    let mut warnings = Vec::new();
    let affect = parse_affect(&value["affect"], &mut warnings);
    for w in &warnings {
        tracing::warn!(target: "relate_sim::memory", "{w}");
    }
    Ok(Appraisal {
        affect,
        internal_thought: value["internal_thought"]
            .as_str()
            .unwrap_or_default()
            .to_string(),
        warnings,
    })
}

/// Appends a simulation-layer entry with both embeddings.
pub async fn record_episode<'s>(
    gateway: &Gateway,
    store: &'s mut MemoryStore,
    cache: &mut AffectCache,
    scene_index: u32,
    text: &str,
) -> Result<&'s MemoryEntry, MemoryError> {
    let semantic = gateway.embed(text).await?;
    let (affect, _) = affect_embed(gateway, cache, text).await?;
    store.append(MemoryLayer::Simulation, scene_index, text, semantic, affect)
}

/// Appends a short-term scene-layer note. Its affect is the agent's current
/// appraisal rather than a fresh scoring call.
pub async fn record_scene_note(
    gateway: &Gateway,
    store: &mut MemoryStore,
    scene_index: u32,
    text: &str,
    affect: AffectVector,
) -> Result<(), MemoryError> {
    let semantic = gateway.embed(text).await?;
    store.append(MemoryLayer::Scene, scene_index, text, semantic, affect)?;
    Ok(())
}
