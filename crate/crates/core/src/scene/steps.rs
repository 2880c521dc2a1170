//! Individual Scene Master steps, one chat call each (plus repairs).

use serde_json::Value;

use super::bank::Scenario;
use super::SceneError;
use crate::domain::{
    ActionOption, CommitmentEstimate, OptionSet, Partner, Persona, RelationshipState, SceneState,
    TurningPointCategory, STATE_FIELDS,
};
use crate::gateway::schema::names;
use crate::gateway::{Gateway, GatewayError, PromptSpec};
use crate::persona::commitment_from_value;
use crate::prompts::{self, role, sec};
use crate::util::truncate_words;

/// Upper bound on rolling summary length, in words.
pub const SUMMARY_MAX_WORDS: usize = 150;

/// A scenario made concrete for one couple.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedScene {
    pub category: TurningPointCategory,
    pub scene_state: SceneState,
    pub stakes: String,
    pub third_party: Option<String>,
    pub source_scenario_id: String,
}

impl ExpandedScene {
    pub fn render(&self) -> String {
        let s = &self.scene_state;
        let mut out = format!(
            "theme: {}\nsetting: {}\nNPC: {}\ncurrent_scene: {}\nprevious_summary: {}\ncharacter_1_goal: {}\ncharacter_2_goal: {}\nscene_conflict: {}\nstakes: {}",
            s.theme,
            s.setting,
            s.npcs.join(", "),
            s.current_scene,
            s.previous_summary,
            s.character_1_goal,
            s.character_2_goal,
            s.scene_conflict,
            self.stakes,
        );
        if let Some(t) = &self.third_party {
            out.push_str(&format!("\nthird_party: {t}"));
        }
        out
    }

    pub fn goal(&self, partner: Partner) -> &str {
        match partner {
            Partner::A => &self.scene_state.character_1_goal,
            Partner::B => &self.scene_state.character_2_goal,
        }
    }
}

fn category_line(c: TurningPointCategory) -> String {
    format!("{} ({}: {})", c, c.label(), c.description())
}

fn transcript_text(lines: &[String]) -> String {
    if lines.is_empty() {
        "(the scene has just opened)".into()
    } else {
        lines.join("\n")
    }
}

fn summary_text(s: &str) -> &str {
    if s.trim().is_empty() {
        "(this is the first scene)"
    } else {
        s
    }
}

/// Picks one candidate. A single candidate needs no call; a non-candidate
/// answer gets one repair, then falls back to the first candidate.
#[allow(clippy::too_many_arguments)]
pub async fn select_scenario<'c>(
    gateway: &Gateway,
    candidates: &[&'c Scenario],
    persona_a: &Persona,
    persona_b: &Persona,
    previous_summary: &str,
    state: &RelationshipState,
    seed: Option<u64>,
    warnings: &mut Vec<String>,
) -> Result<&'c Scenario, SceneError> {
    let first = *candidates.first().ok_or(SceneError::NoCandidates)?;
    if candidates.len() == 1 {
        return Ok(first);
    }
    let listing = candidates
        .iter()
        .map(|c| format!("{}: {} [{}]", c.id, c.synopsis, c.tags.join(", ")))
        .collect::<Vec<_>>()
        .join("\n");
    let spec = PromptSpec::new(role::SCENARIO_SELECTION, names::SCENARIO_CHOICE)
        .seed(seed)
        .section(sec::TASK, prompts::SCENARIO_SELECTION_TASK)
        .section(sec::PERSONA_A, persona_a.render())
        .section(sec::PERSONA_B, persona_b.render())
        .section(sec::PREVIOUS_SUMMARY, summary_text(previous_summary))
        .section(sec::RELATIONSHIP_STATE, prompts::render_state(state))
        .section(sec::CATEGORY, category_line(first.category))
        .section(sec::CANDIDATES, listing)
        .section(sec::OUTPUT, prompts::SCENARIO_SELECTION_OUTPUT);
    let picked = gateway
        .chat_checked(&spec, 1, |v| {
            let id = v["scenario_id"]
                .as_str()
                .unwrap_or_default()
                .trim()
                .to_string();
            candidates
                .iter()
                .find(|c| c.id == id)
                .copied()
                .ok_or_else(|| format!("scenario_id {id:?} is not one of the candidates"))
        })
        .await;
    match picked {
        Ok(s) => Ok(s),
        Err(GatewayError::Rejected { reason, .. }) => {
            let w = format!("scenario selection fell back to {}: {reason}", first.id);
            tracing::warn!("{w}");
            warnings.push(w);
            Ok(first)
        }
        Err(e) => Err(e.into()),
    }
}

fn string_field(v: &Value, key: &str) -> String {
    v[key].as_str().unwrap_or_default().trim().to_string()
}

/// Fills the scene state dictionary. `previous_summary` is copied verbatim.
pub async fn expand_scene(
    gateway: &Gateway,
    scenario: &Scenario,
    persona_a: &Persona,
    persona_b: &Persona,
    previous_summary: &str,
    seed: Option<u64>,
) -> Result<ExpandedScene, SceneError> {
    let spec = PromptSpec::new(role::SCENE_EXPANSION, names::SCENE_EXPANSION)
        .seed(seed)
        .section(sec::TASK, prompts::SCENE_EXPANSION_TASK)
        .section(
            sec::SCENARIO,
            format!(
                "id: {}\ncategory: {}\nsynopsis: {}\ntags: {}",
                scenario.id,
                category_line(scenario.category),
                scenario.synopsis,
                scenario.tags.join(", ")
            ),
        )
        .section(sec::PERSONA_A, persona_a.render())
        .section(sec::PERSONA_B, persona_b.render())
        .section(sec::PREVIOUS_SUMMARY, summary_text(previous_summary))
        .section(sec::OUTPUT, prompts::SCENE_EXPANSION_OUTPUT);
    let v = gateway
        .chat_checked(&spec, 1, |v| {
            if string_field(&v, "scene_conflict").is_empty() {
                Err("scene_conflict must not be empty".to_string())
            } else {
                Ok(v)
            }
        })
        .await
        .map_err(|e| match e {
            GatewayError::Rejected { reason, .. } => SceneError::Expansion(reason),
            GatewayError::Schema { message, .. } => SceneError::Expansion(message),
            other => other.into(),
        })?;
    let npcs = v["NPC"]
        .as_array()
        .map(|a| {
            a.iter()
                .filter_map(Value::as_str)
                .map(str::to_string)
                .collect()
        })
        .unwrap_or_default();
    let third_party = Some(string_field(&v, "third_party")).filter(|t| !t.is_empty());
    Ok(ExpandedScene {
        category: scenario.category,
        scene_state: SceneState {
            theme: string_field(&v, "theme"),
            setting: string_field(&v, "setting"),
            npcs,
            current_scene: string_field(&v, "current_scene"),
            previous_summary: previous_summary.to_string(),
            character_1_goal: string_field(&v, "character_1_goal"),
            character_2_goal: string_field(&v, "character_2_goal"),
            scene_conflict: string_field(&v, "scene_conflict"),
        },
        stakes: string_field(&v, "stakes"),
        third_party,
        source_scenario_id: scenario.id.clone(),
    })
}

/// Where the narration loop stands within a scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NarrationProgress {
    pub decisions: u32,
    pub max_decisions: u32,
    /// Consecutive non-stop steps since the last decision point.
    pub steps_since_decision: u32,
    pub max_steps: u32,
    pub last_actor: Option<Partner>,
}

impl NarrationProgress {
    pub fn round_robin(&self) -> Partner {
        self.last_actor.map(Partner::other).unwrap_or(Partner::A)
    }

    fn render(&self) -> String {
        format!(
            "decisions so far: {} of at most {}\nnarration steps since the last decision: {} of at most {}\nlast acting partner: {}",
            self.decisions,
            self.max_decisions,
            self.steps_since_decision,
            self.max_steps,
            self.last_actor.map(|p| p.as_str()).unwrap_or("none")
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NarrationStep {
    pub narration: String,
    pub stop: bool,
    pub acting_partner: Option<Partner>,
    pub scene_complete: bool,
    /// True when the step limit forced this decision point.
    pub forced: bool,
}

/// One narration beat. A stop always names an actor: a missing or invalid
/// actor falls back to round-robin, and reaching `max_steps` consecutive
/// non-stop beats forces a stop the same way.
#[allow(clippy::too_many_arguments)]
pub async fn advance_narrative(
    gateway: &Gateway,
    scene: &ExpandedScene,
    persona_a: &Persona,
    persona_b: &Persona,
    transcript: &[String],
    progress: NarrationProgress,
    seed: Option<u64>,
    warnings: &mut Vec<String>,
) -> Result<NarrationStep, SceneError> {
    let spec = PromptSpec::new(role::NARRATION, names::NARRATION_STEP)
        .seed(seed)
        .section(sec::TASK, prompts::NARRATION_TASK)
        .section(sec::SCENE_STATE, scene.render())
        .section(sec::CATEGORY, category_line(scene.category))
        .section(sec::PERSONA_A, persona_a.render())
        .section(sec::PERSONA_B, persona_b.render())
        .section(sec::TRANSCRIPT, transcript_text(transcript))
        .section(sec::PROGRESS, progress.render())
        .section(sec::OUTPUT, prompts::NARRATION_OUTPUT);
    let v = gateway.chat(&spec).await?.into_value()?;
    let mut step = NarrationStep {
        narration: string_field(&v, "narration"),
        stop: v["stop"].as_bool().unwrap_or(false),
        acting_partner: v["acting_partner"]
            .as_str()
            .and_then(|p| p.trim().parse().ok()),
        scene_complete: v["scene_complete"].as_bool().unwrap_or(false),
        forced: false,
    };
    if step.stop && step.acting_partner.is_none() {
        let w = format!(
            "narration stopped without a valid acting partner ({}); using round-robin",
            v["acting_partner"]
        );
        tracing::warn!("{w}");
        warnings.push(w);
        step.acting_partner = Some(progress.round_robin());
    }
    if !step.stop && !step.scene_complete && progress.steps_since_decision + 1 >= progress.max_steps
    {
        step.stop = true;
        step.forced = true;
        step.acting_partner = Some(progress.round_robin());
        warnings.push(format!(
            "forced a decision point after {} narration steps",
            progress.max_steps
        ));
    }
    if !step.stop {
        step.acting_partner = None;
    }
    Ok(step)
}

fn parse_options(v: &Value, acting: Partner) -> Result<OptionSet, String> {
    let declared = v["acting_partner"].as_str().unwrap_or_default();
    if declared.trim().parse::<Partner>().ok() != Some(acting) {
        return Err(format!("acting_partner must be {acting}, got {declared:?}"));
    }
    let mut options = Vec::new();
    for (i, o) in v["options"].as_array().into_iter().flatten().enumerate() {
        let actor_tok = o["actor"].as_str().unwrap_or_default();
        let actor: Partner = actor_tok
            .trim()
            .parse()
            .map_err(|_| format!("option {} has invalid actor {actor_tok:?}", i + 1))?;
        options.push(ActionOption {
            id: format!("o{}", i + 1),
            description: o["description"]
                .as_str()
                .unwrap_or_default()
                .trim()
                .to_string(),
            actor,
        });
    }
    let set = OptionSet {
        options,
        acting_partner: acting,
    };
    let problems = set.violations();
    if problems.is_empty() {
        Ok(set)
    } else {
        Err(problems.join("; "))
    }
}

/// Curates 3–4 single-actor options for `acting`. One repair on an invalid
/// set, then error. Ids are assigned `o1..oN` in the order given.
#[allow(clippy::too_many_arguments)]
pub async fn generate_options(
    gateway: &Gateway,
    scene: &ExpandedScene,
    transcript: &[String],
    state: &RelationshipState,
    acting: Partner,
    acting_persona: &Persona,
    seed: Option<u64>,
) -> Result<OptionSet, SceneError> {
    let spec = PromptSpec::new(role::OPTIONS, names::OPTION_SET)
        .seed(seed)
        .section(sec::TASK, prompts::OPTIONS_TASK)
        .section(sec::SCENE_STATE, scene.render())
        .section(sec::CATEGORY, category_line(scene.category))
        .section(sec::RELATIONSHIP_STATE, prompts::render_state(state))
        .section(sec::TRANSCRIPT, transcript_text(transcript))
        .section(sec::ACTING_PARTNER, acting.as_str())
        .section(sec::ACTING_PERSONA, acting_persona.render())
        .section(sec::OUTPUT, prompts::OPTIONS_OUTPUT);
    gateway
        .chat_checked(&spec, 1, |v| parse_options(&v, acting))
        .await
        .map_err(|e| match e {
            GatewayError::Rejected { reason, .. } => SceneError::Options(reason),
            other => other.into(),
        })
}

/// Reads the eight state fields; unknown tokens become `unknown` with a
/// warning. Also returns the model's confirmation of the active category.
pub async fn infer_states(
    gateway: &Gateway,
    scene: &ExpandedScene,
    transcript: &[String],
    previous: &RelationshipState,
    seed: Option<u64>,
    warnings: &mut Vec<String>,
) -> Result<(RelationshipState, Option<TurningPointCategory>), SceneError> {
    let spec = PromptSpec::new(role::STATE_INFERENCE, names::RELATIONSHIP_STATE)
        .seed(seed)
        .section(sec::TASK, prompts::STATE_INFERENCE_TASK)
        .section(sec::VOCABULARY, prompts::state_vocabulary())
        .section(sec::PREVIOUS_STATE, prompts::render_state(previous))
        .section(sec::CATEGORY, category_line(scene.category))
        .section(sec::SCENE_STATE, scene.render())
        .section(sec::TRANSCRIPT, transcript_text(transcript))
        .section(sec::OUTPUT, prompts::STATE_INFERENCE_OUTPUT);
    let v = gateway.chat(&spec).await?.into_value()?;
    let mut obj = serde_json::Map::new();
    for field in STATE_FIELDS {
        let raw = v[field].as_str().unwrap_or_default().trim().to_lowercase();
        let vocab = RelationshipState::vocabulary(field).expect("known field");
        let token = if vocab.contains(&raw.as_str()) {
            raw
        } else {
            let w = format!(
                "state field {field}: unknown token {:?}; recorded as unknown",
                v[field].as_str().unwrap_or_default()
            );
            tracing::warn!("{w}");
            warnings.push(w);
            "unknown".to_string()
        };
        obj.insert(field.to_string(), Value::String(token));
    }
    let state: RelationshipState =
        serde_json::from_value(Value::Object(obj)).expect("tokens were checked");
    let confirmed = match v["category"].as_str() {
        None => None,
        Some(tok) => match tok.trim().parse::<TurningPointCategory>() {
            Ok(c) => {
                if c != scene.category {
                    warnings.push(format!(
                        "state inference re-labelled the scene as {c} (selected {})",
                        scene.category
                    ));
                }
                Some(c)
            }
            Err(_) => {
                warnings.push(format!("state inference returned unknown category {tok:?}"));
                None
            }
        },
    };
    Ok((state, confirmed))
}

/// Per-scene commitment with the versioned rubric; the previous estimate
/// is shown for continuity. Out-of-range scores are clamped with a warning.
pub async fn score_commitment(
    gateway: &Gateway,
    scene: &ExpandedScene,
    transcript: &[String],
    state: &RelationshipState,
    previous: Option<&CommitmentEstimate>,
    seed: Option<u64>,
    warnings: &mut Vec<String>,
) -> Result<CommitmentEstimate, SceneError> {
    let previous_text = match previous {
        Some(p) => format!("score: {}\nrationale: {}", p.score, p.rationale),
        None => "(none)".to_string(),
    };
    let spec = PromptSpec::new(role::COMMITMENT, names::COMMITMENT)
        .seed(seed)
        .section(sec::TASK, prompts::COMMITMENT_TASK)
        .section(sec::RUBRIC, prompts::COMMITMENT_RUBRIC)
        .section(sec::PREVIOUS_ESTIMATE, previous_text)
        .section(sec::RELATIONSHIP_STATE, prompts::render_state(state))
        .section(sec::SCENE_STATE, scene.render())
        .section(sec::TRANSCRIPT, transcript_text(transcript))
        .section(sec::OUTPUT, prompts::COMMITMENT_OUTPUT);
    let v = gateway.chat(&spec).await?.into_value()?;
    let (est, w) = commitment_from_value(&v);
    warnings.extend(w);
    Ok(est)
}

/// Rolling summary, truncated to [`SUMMARY_MAX_WORDS`] with a warning.
pub async fn update_summary(
    gateway: &Gateway,
    previous_summary: &str,
    scene: &ExpandedScene,
    transcript: &[String],
    state: &RelationshipState,
    seed: Option<u64>,
    warnings: &mut Vec<String>,
) -> Result<String, SceneError> {
    let spec = PromptSpec::new(role::ROLLING_SUMMARY, names::SUMMARY)
        .seed(seed)
        .section(sec::TASK, prompts::ROLLING_SUMMARY_TASK)
        .section(sec::PREVIOUS_SUMMARY, summary_text(previous_summary))
        .section(sec::SCENE_STATE, scene.render())
        .section(sec::TRANSCRIPT, transcript_text(transcript))
        .section(sec::RELATIONSHIP_STATE, prompts::render_state(state))
        .section(sec::OUTPUT, prompts::ROLLING_SUMMARY_OUTPUT);
    let v = gateway.chat(&spec).await?.into_value()?;
    let (summary, cut) =
        truncate_words(v["summary"].as_str().unwrap_or_default(), SUMMARY_MAX_WORDS);
    if cut {
        warnings.push(format!(
            "rolling summary truncated to {SUMMARY_MAX_WORDS} words"
        ));
    }
    if summary.is_empty() {
        return Err(SceneError::Summary("empty rolling summary".into()));
    }
    Ok(summary)
}
