//! Persona-aligned decision making over Scene-Master-provided options.
//!
//! A decision is appraise → retrieve → assemble prompt → one chat call. The
//! reply is mapped back onto the presented options; agents never invent
//! behavior of their own.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain::{
    AffectVector, Controller, Decision, MemoryLayer, OptionSet, Partner, Persona,
    RelationshipMetrics, AFFECT_NAMES,
};
use crate::gateway::schema::names;
use crate::gateway::{Gateway, GatewayError, PromptSpec};
use crate::memory::{self, AffectCache, MemoryError, MemoryStore, RetrievalResult};
use crate::prompts::{decision as tpl, role, sec};
use crate::util::tokens;

/// Minimum token-set Jaccard overlap for a paraphrase to count as an option.
pub const MATCH_THRESHOLD: f64 = 0.6;
/// History lines shown to the appraisal step.
const APPRAISAL_HISTORY: usize = 12;

/// Layers searched by default; the scene layer is injected inline instead.
pub const RETRIEVAL_LAYERS: [MemoryLayer; 2] = [MemoryLayer::Identity, MemoryLayer::Simulation];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub partner: Partner,
    pub persona: Persona,
    pub memory: MemoryStore,
    /// Rendered scene events this agent has witnessed, oldest first.
    pub history: Vec<String>,
    pub affect: AffectVector,
    pub internal_thought: String,
    pub metrics: RelationshipMetrics,
}

impl AgentState {
    pub fn new(partner: Partner, persona: Persona, memory: MemoryStore) -> Self {
        Self {
            partner,
            persona,
            memory,
            history: Vec::new(),
            affect: AffectVector::default(),
            internal_thought: String::new(),
            metrics: RelationshipMetrics::default(),
        }
    }

    pub fn observe(&mut self, line: impl Into<String>) {
        self.history.push(line.into());
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionParams {
    pub k: usize,
    pub lambda: f64,
    pub seed: Option<u64>,
}

impl Default for DecisionParams {
    fn default() -> Self {
        Self {
            k: memory::DEFAULT_K,
            lambda: memory::DEFAULT_LAMBDA,
            seed: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DecisionError {
    #[error("agent {agent} asked to act on options for partner {acting}")]
    WrongPartner { agent: Partner, acting: Partner },
    #[error("invalid option set: {0}")]
    InvalidOptions(String),
    #[error("decision matched no presented option: {0}")]
    Unmatched(String),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Gateway(GatewayError),
}

impl From<GatewayError> for DecisionError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::Rejected { reason, .. } => DecisionError::Unmatched(reason),
            other => DecisionError::Gateway(other),
        }
    }
}

pub fn render_options(options: &OptionSet) -> String {
    options
        .options
        .iter()
        .map(|o| format!("{}: {}", o.id, o.description))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_memories(retrieved: &RetrievalResult) -> String {
    if retrieved.entries.is_empty() {
        return tpl::EMPTY_MEMORIES.to_string();
    }
    retrieved
        .entries
        .iter()
        .map(|s| format!("- [{}] {}", s.entry.id, s.entry.text))
        .collect::<Vec<_>>()
        .join("\n")
}

/// The decision prompt: fixed role, instructions and criteria, then the
/// context inputs (internal thought, persona, scene history, memories,
/// options) and the output format.
pub fn assemble_decision_prompt(
    persona: &Persona,
    scene_context: &str,
    retrieved: &RetrievalResult,
    internal_thought: &str,
    options: &OptionSet,
) -> PromptSpec {
    PromptSpec::new(role::DECISION, names::DECISION)
        .section(tpl::ROLE_SECTION, tpl::ROLE)
        .section(tpl::INSTRUCTIONS_SECTION, tpl::INSTRUCTIONS)
        .section(tpl::CRITERIA_SECTION, tpl::CRITERIA)
        .section(sec::INTERNAL_THOUGHT, internal_thought)
        .section(sec::YOUR_PERSONA, persona.render())
        .section(sec::SCENE_HISTORY, scene_context)
        .section(sec::MEMORIES, render_memories(retrieved))
        .section(sec::ACTION_OPTIONS, render_options(options))
        .section(sec::OUTPUT, tpl::OUTPUT)
        .section(tpl::OPTION_REFERENCE_SECTION, tpl::OPTION_REFERENCE)
}

pub fn jaccard(a: &str, b: &str) -> f64 {
    let sa: BTreeSet<String> = tokens(a).into_iter().collect();
    let sb: BTreeSet<String> = tokens(b).into_iter().collect();
    if sa.is_empty() && sb.is_empty() {
        return 0.0;
    }
    let inter = sa.intersection(&sb).count() as f64;
    let union = sa.union(&sb).count() as f64;
    inter / union
}

/// Maps a model reply onto an option id: an explicit `option_id`, then an id
/// leading the action text, then the best description overlap at or above
/// [`MATCH_THRESHOLD`].
pub fn match_option(reply: &Value, options: &OptionSet) -> Result<String, String> {
    if let Some(id) = reply["option_id"].as_str() {
        if options.get(id.trim()).is_some() {
            return Ok(id.trim().to_string());
        }
    }
    let action = reply["action"].as_str().unwrap_or_default();
    let lead = action
        .trim_start()
        .split(|c: char| !c.is_alphanumeric())
        .next()
        .unwrap_or_default();
    if let Some(o) = options.options.iter().find(|o| o.id == lead) {
        return Ok(o.id.clone());
    }
    let mut best: Option<(&str, f64)> = None;
    for o in &options.options {
        let score = jaccard(action, &o.description);
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((&o.id, score));
        }
    }
    match best {
        Some((id, score)) if score >= MATCH_THRESHOLD => Ok(id.to_string()),
        _ => Err(format!(
            "action {action:?} is not one of the options {}; choose only from those provided",
            options.ids().join(", ")
        )),
    }
}

fn emotion_tags(reply: &Value) -> Option<Vec<String>> {
    let tags = reply["emotion_tags"].as_array()?;
    Some(
        tags.iter()
            .filter_map(Value::as_str)
            .map(|t| t.trim().to_lowercase())
            .filter(|t| AFFECT_NAMES.contains(&t.as_str()))
            .collect(),
    )
}

/// Recent history lines for appraisal.
fn recent(history: &[String]) -> &[String] {
    &history[history.len().saturating_sub(APPRAISAL_HISTORY)..]
}

/// Chooses one of `options` for `agent`. Exactly one decision chat call is
/// made when the first reply maps onto an option; an unmatched reply gets
/// one repair call, then fails.
pub async fn decide(
    gateway: &Gateway,
    agent: &mut AgentState,
    scene_context: &str,
    options: &OptionSet,
    params: DecisionParams,
) -> Result<Decision, DecisionError> {
    if options.acting_partner != agent.partner {
        return Err(DecisionError::WrongPartner {
            agent: agent.partner,
            acting: options.acting_partner,
        });
    }
    let problems = options.violations();
    if !problems.is_empty() {
        return Err(DecisionError::InvalidOptions(problems.join("; ")));
    }
    let appraisal = memory::appraise(
        gateway,
        &agent.persona,
        recent(&agent.history),
        scene_context,
        params.seed,
    )
    .await?;
    agent.affect = appraisal.affect;
    agent.internal_thought = appraisal.internal_thought;

    let retrieved = memory::retrieve_top_k(
        gateway,
        &agent.memory,
        scene_context,
        &agent.affect,
        params.k,
        params.lambda,
        &RETRIEVAL_LAYERS,
    )
    .await?;
    let spec = assemble_decision_prompt(
        &agent.persona,
        scene_context,
        &retrieved,
        &agent.internal_thought,
        options,
    )
    .seed(params.seed);

    let (reply, chosen) = gateway
        .chat_checked(&spec, 1, |v| match_option(&v, options).map(|id| (v, id)))
        .await?;
    let description = &options.get(&chosen).expect("matched id exists").description;
    let action = reply["action"].as_str().unwrap_or_default().trim();
    Ok(Decision {
        partner: agent.partner,
        chosen_option_id: chosen.clone(),
        action_text: if action.is_empty() {
            description.clone()
        } else {
            action.to_string()
        },
        reasoning: reply["reasoning"].as_str().unwrap_or_default().to_string(),
        confidence: reply["confidence"].as_f64().map(|c| c.clamp(0.0, 1.0)),
        emotion_tags: emotion_tags(&reply),
        controller: Controller::Agent,
        shadow_option_id: None,
        internal_thought: agent.internal_thought.clone(),
        affect: agent.affect,
        retrieved_memory_ids: retrieved.ids(),
        prompt: spec.render(),
    })
}

/// Records a decision in the agent's simulation memory.
pub async fn remember(
    gateway: &Gateway,
    agent: &mut AgentState,
    cache: &mut AffectCache,
    scene_index: u32,
    text: &str,
) -> Result<(), MemoryError> {
    memory::record_episode(gateway, &mut agent.memory, cache, scene_index, text).await?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::fixtures;
    use crate::gateway::{GatewayConfig, Matcher, ScriptRule, ScriptedBackend};
    use serde_json::json;
    use std::sync::Arc;

    fn appraisal_rule() -> ScriptRule {
        ScriptRule::json(
            role::APPRAISAL,
            json!({"affect": {"joy": 0.1, "sadness": 0.1, "fear": 0.3, "surprise": 0.0, "anger": 0.2, "disgust": 0.0, "trust": 0.5, "anticipation": 0.4}, "internal_thought": "Stay calm."}),
        )
        .repeating()
    }

    fn setup(rules: Vec<ScriptRule>) -> (Arc<ScriptedBackend>, Gateway, AgentState) {
        let mut all = vec![appraisal_rule()];
        all.extend(rules);
        let b = Arc::new(ScriptedBackend::new(all, 16));
        let gw = Gateway::new(b.clone(), GatewayConfig::default());
        let agent = AgentState::new(Partner::B, fixtures::persona("B"), MemoryStore::new(16));
        (b, gw, agent)
    }

    fn options() -> OptionSet {
        let mut s = fixtures::option_set(Partner::B, 3);
        s.options[0].description = "Apologize for the sharp remark and ask what would help".into();
        s.options[1].description = "Leave the apartment and go for a long walk alone".into();
        s.options[2].description = "Bring up the unpaid credit card bill again".into();
        s
    }

    #[tokio::test]
    async fn picks_by_id_with_one_call() {
        let (b, gw, mut agent) = setup(vec![ScriptRule::json(
            role::DECISION,
            json!({"action": "o2: I head out for a walk", "reasoning": "I need air", "confidence": 0.8, "emotion_tags": ["fear", "Sadness", "boredom"]}),
        )]);
        let d = decide(
            &gw,
            &mut agent,
            "They argue.",
            &options(),
            DecisionParams::default(),
        )
        .await
        .unwrap();
        assert_eq!(d.chosen_option_id, "o2");
        assert_eq!(d.confidence, Some(0.8));
        assert_eq!(d.emotion_tags, Some(vec!["fear".into(), "sadness".into()]));
        assert_eq!(d.internal_thought, "Stay calm.");
        assert_eq!(b.calls_for(role::DECISION), 1);
        assert!(d.prompt.contains("Relevant Memories:\n(none retrieved)"));
    }

    #[tokio::test]
    async fn paraphrase_maps_to_option() {
        let (_, gw, mut agent) = setup(vec![ScriptRule::json(
            role::DECISION,
            json!({"action": "Apologize for my sharp remark and ask what would help", "reasoning": "repair"}),
        )]);
        let d = decide(
            &gw,
            &mut agent,
            "ctx",
            &options(),
            DecisionParams::default(),
        )
        .await
        .unwrap();
        assert_eq!(d.chosen_option_id, "o1");
    }

    #[tokio::test]
    async fn novel_action_twice_is_an_error() {
        let (b, gw, mut agent) = setup(vec![ScriptRule::json(
            role::DECISION,
            json!({"action": "Book a surprise trip to Lisbon", "reasoning": "spontaneous"}),
        )
        .repeating()]);
        let err = decide(
            &gw,
            &mut agent,
            "ctx",
            &options(),
            DecisionParams::default(),
        )
        .await
        .unwrap_err();
        assert!(matches!(err, DecisionError::Unmatched(_)), "{err}");
        assert_eq!(b.calls_for(role::DECISION), 2);
    }

    #[tokio::test]
    async fn invariant_to_option_order() {
        let mut shuffled = options();
        shuffled.options.rotate_left(1);
        for set in [options(), shuffled] {
            let (_, gw, mut agent) = setup(vec![ScriptRule::json(
                role::DECISION,
                json!({"action": "o3", "reasoning": "r"}),
            )
            .when(Matcher::section(sec::ACTION_OPTIONS, "o3: Bring up"))]);
            let d = decide(&gw, &mut agent, "ctx", &set, DecisionParams::default())
                .await
                .unwrap();
            assert_eq!(d.chosen_option_id, "o3");
        }
    }

    #[tokio::test]
    async fn rejects_other_partners_options() {
        let (_, gw, mut agent) = setup(vec![]);
        let err = decide(
            &gw,
            &mut agent,
            "ctx",
            &fixtures::option_set(Partner::A, 3),
            DecisionParams::default(),
        )
        .await
        .unwrap_err();
        assert!(matches!(err, DecisionError::WrongPartner { .. }));
    }

    #[test]
    fn prompt_lists_options_in_order() {
        let spec = assemble_decision_prompt(
            &fixtures::persona("A"),
            "ctx",
            &RetrievalResult::default(),
            "thought",
            &fixtures::option_set(Partner::A, 3),
        );
        let listed = spec.get(sec::ACTION_OPTIONS).unwrap();
        assert_eq!(listed.lines().count(), 3);
        assert!(listed.starts_with("o1: ") && listed.contains("\no3: "));
        let names: Vec<_> = spec.sections.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "Role",
                "Instructions",
                "Selection criteria (use qualitative judgment, not numeric scoring)",
                "Most Recent Internal Thought",
                "Your Persona",
                "Scene History",
                "Relevant Memories",
                "Action Options",
                "Output",
                "Option Reference"
            ]
        );
    }

    #[test]
    fn matching_rules() {
        let set = options();
        assert_eq!(
            match_option(&json!({"option_id": "o3", "action": "x"}), &set).unwrap(),
            "o3"
        );
        assert_eq!(
            match_option(&json!({"option_id": "o9", "action": "o1"}), &set).unwrap(),
            "o1"
        );
        assert!(match_option(&json!({"action": "o12 is best"}), &set).is_err());
        assert!((jaccard("a b c", "a b d") - 0.5).abs() < 1e-12);
        assert_eq!(jaccard("", ""), 0.0);
    }
}
