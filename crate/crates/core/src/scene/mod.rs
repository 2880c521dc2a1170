//! The Scene Master: turning-point selection, scene framing, narration,
//! option curation, state inference, commitment scoring, and the run loop.
//!
//! A run is strictly sequential. Each scene:
//!
//! 1. picks a category from the relationship state and samples candidates;
//! 2. selects and expands one scenario;
//! 3. alternates narration beats with decision points (options → decision →
//!    both agents record the episode) until the scene completes;
//! 4. infers the new relationship state, scores commitment and updates the
//!    rolling summary.
//!
//! After every scene a versioned checkpoint can be written so an
//! interrupted run resumes with identical results.

pub mod bank;
pub mod category;
pub mod steps;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use crate::agent::{self, AgentState, DecisionError, DecisionParams};
use crate::domain::{
    event_id, Alternatives, BreakupMarker, CommitmentEstimate, ConfigSnapshot, Constraints,
    Controller, Decision, OptionSet, Partner, Persona, RelationshipMetrics, RelationshipState,
    SceneEvent, SceneRecord, SimulationTrace,
};
use crate::gateway::{Gateway, GatewayError};
use crate::memory::{self, AffectCache, MemoryError, MemoryStore};
use crate::prompts::COMMITMENT_RUBRIC_VERSION;
use crate::util::derive_seed;

pub use bank::{generate_bank, BankError, Scenario, ScenarioBank};
pub use category::{sample_candidates, select_category, CANDIDATE_POOL};
pub use steps::{ExpandedScene, NarrationProgress, NarrationStep};

pub const CHECKPOINT_VERSION: u32 = 1;
/// Identity entries preloaded per agent.
const MAX_IDENTITY_ENTRIES: usize = 12;

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("no scenarios available for any category")]
    NoCandidates,
    #[error("scene expansion failed: {0}")]
    Expansion(String),
    #[error("option generation failed: {0}")]
    Options(String),
    #[error("summary failed: {0}")]
    Summary(String),
    #[error("decision failed: {0}")]
    Decision(#[from] DecisionError),
    #[error("human decision failed: {0}")]
    Human(String),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dyad {
    pub dyad_id: String,
    pub partner_a: Persona,
    pub partner_b: Persona,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub num_scenes: u32,
    pub k: usize,
    pub lambda: f64,
    pub candidate_pool: usize,
    pub max_narration_steps: u32,
    pub max_decisions_per_scene: u32,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            num_scenes: 8,
            k: memory::DEFAULT_K,
            lambda: memory::DEFAULT_LAMBDA,
            candidate_pool: CANDIDATE_POOL,
            max_narration_steps: 12,
            max_decisions_per_scene: 3,
        }
    }
}

impl SimulationConfig {
    pub fn snapshot(&self, gateway: &Gateway) -> ConfigSnapshot {
        ConfigSnapshot {
            num_scenes: self.num_scenes,
            k: self.k,
            lambda: self.lambda,
            candidate_pool: self.candidate_pool,
            max_narration_steps: self.max_narration_steps,
            max_decisions_per_scene: self.max_decisions_per_scene,
            backend: gateway.backend_name().to_string(),
            embedding_dimension: gateway.embedding_dimension(),
            commitment_rubric: COMMITMENT_RUBRIC_VERSION.to_string(),
        }
    }
}

/// An open decision point handed to a human controller.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionPoint {
    pub scene_index: u32,
    pub options: OptionSet,
    /// The agent's own pick for the same point.
    pub shadow_option_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HumanChoice {
    pub option_id: String,
    pub rationale: String,
}

/// Lets a human take over one partner's decisions and observe the run.
#[async_trait]
pub trait DecisionHook: Send + Sync {
    fn controls(&self, partner: Partner) -> bool;

    /// Parks until the human picks; the returned id must be in the set.
    async fn choose(&self, point: DecisionPoint) -> Result<HumanChoice, String>;

    fn observe(&self, _scene_index: u32, _line: &str) {}

    fn scene_started(&self, _scene_index: u32, _scene: &ExpandedScene) {}

    fn scene_finished(&self, _record: &SceneRecord, _previous: &RelationshipState) {}
}

#[derive(Clone, Default)]
pub struct RunOptions {
    pub run_index: u32,
    pub hook: Option<Arc<dyn DecisionHook>>,
    /// Directory for per-scene checkpoints; an existing checkpoint for the
    /// same run is resumed.
    pub checkpoint_dir: Option<PathBuf>,
}

/// Resumable state after a completed scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub dyad_id: String,
    pub run_index: u32,
    pub run_seed: u64,
    pub config: ConfigSnapshot,
    pub scenes: Vec<SceneRecord>,
    pub agents: [AgentState; 2],
    pub affect_cache: AffectCache,
    pub state: RelationshipState,
}

pub fn checkpoint_path(dir: &Path, scene_index: u32) -> PathBuf {
    dir.join(format!("scene-{scene_index}.json"))
}

/// Latest readable checkpoint in `dir` matching the run identity.
pub fn latest_checkpoint(
    dir: &Path,
    dyad_id: &str,
    run_index: u32,
    run_seed: u64,
    config: &ConfigSnapshot,
) -> Option<Checkpoint> {
    let entries = std::fs::read_dir(dir).ok()?;
    let mut best: Option<Checkpoint> = None;
    for e in entries.flatten() {
        let Ok(text) = std::fs::read_to_string(e.path()) else {
            continue;
        };
        let Ok(cp) = serde_json::from_str::<Checkpoint>(&text) else {
            tracing::warn!(path = %e.path().display(), "ignoring unreadable checkpoint");
            continue;
        };
        let matches = cp.version == CHECKPOINT_VERSION
            && cp.dyad_id == dyad_id
            && cp.run_index == run_index
            && cp.run_seed == run_seed
            && &cp.config == config
            && !cp.scenes.is_empty();
        if matches
            && best
                .as_ref()
                .is_none_or(|b| cp.scenes.len() > b.scenes.len())
        {
            best = Some(cp);
        }
    }
    best
}

fn write_checkpoint(dir: &Path, cp: &Checkpoint) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let index = cp.scenes.len() as u32 - 1;
    let path = checkpoint_path(dir, index);
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, serde_json::to_vec(cp).expect("checkpoints serialize"))?;
    std::fs::rename(tmp, path)
}

/// Sentences of the narrative plus playbook rules, as identity memories.
pub fn identity_texts(persona: &Persona) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut current = String::new();
    for word in persona.narrative.split_whitespace() {
        if !current.is_empty() {
            current.push(' ');
        }
        current.push_str(word);
        if word.ends_with(['.', '!', '?']) {
            out.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    let rules = persona
        .playbook
        .iter()
        .map(|r| format!("If {}, then {}", r.condition, r.action));
    let mut texts: Vec<String> = rules.collect();
    let room = MAX_IDENTITY_ENTRIES.saturating_sub(texts.len());
    texts.splice(0..0, out.into_iter().take(room));
    texts
}

/// Dyad-level proxies derived from the inferred state and commitment.
/// Unknown state fields carry the previous value forward.
pub fn derive_metrics(
    state: &RelationshipState,
    commitment: &CommitmentEstimate,
    previous: &RelationshipMetrics,
) -> RelationshipMetrics {
    let alternatives = match state.alternatives {
        Alternatives::Quiet => 0.1,
        Alternatives::Salient => 0.6,
        Alternatives::Hot => 0.9,
        Alternatives::Unknown => previous.alternatives,
    };
    let investments = match state.constraints {
        Constraints::None => 0.1,
        Constraints::Emerging => 0.5,
        Constraints::Accrued => 0.9,
        Constraints::Unknown => previous.investments,
    };
    RelationshipMetrics::new((commitment.score - 1.0) / 4.0, alternatives, investments)
}

struct Run<'a> {
    gateway: &'a Gateway,
    bank: &'a ScenarioBank,
    config: &'a SimulationConfig,
    run_seed: u64,
    hook: Option<Arc<dyn DecisionHook>>,
    agents: [AgentState; 2],
    cache: AffectCache,
    state: RelationshipState,
    scenes: Vec<SceneRecord>,
}

/// Runs one simulation. Never fails: step errors end the run and are
/// recorded in the trace's `error` field with the scenes completed so far.
pub async fn run_simulation(
    gateway: &Gateway,
    bank: &ScenarioBank,
    dyad: &Dyad,
    config: &SimulationConfig,
    run_seed: u64,
    options: &RunOptions,
) -> SimulationTrace {
    let snapshot = config.snapshot(gateway);
    let mut trace = SimulationTrace {
        dyad_id: dyad.dyad_id.clone(),
        run_index: options.run_index,
        run_seed,
        config: snapshot.clone(),
        partner_a: dyad.partner_a.clone(),
        partner_b: dyad.partner_b.clone(),
        scenes: Vec::new(),
        final_commitment: None,
        terminated_early: false,
        termination_reason: None,
        error: None,
    };

    let resumed = options.checkpoint_dir.as_deref().and_then(|dir| {
        latest_checkpoint(dir, &dyad.dyad_id, options.run_index, run_seed, &snapshot)
    });
    let mut run = match resumed {
        Some(cp) => {
            tracing::info!(dyad = %dyad.dyad_id, run = options.run_index, scenes = cp.scenes.len(), "resuming from checkpoint");
            Run {
                gateway,
                bank,
                config,
                run_seed,
                hook: options.hook.clone(),
                agents: cp.agents,
                cache: cp.affect_cache,
                state: cp.state,
                scenes: cp.scenes,
            }
        }
        None => match fresh_run(gateway, bank, dyad, config, run_seed, options).await {
            Ok(r) => r,
            Err(e) => {
                trace.error = Some(format!("setup: {e}"));
                return trace;
            }
        },
    };

    while (run.scenes.len() as u32) < config.num_scenes {
        let index = run.scenes.len() as u32;
        if run
            .scenes
            .last()
            .is_some_and(|s| s.inferred_state.breakup_marker == BreakupMarker::Hard)
        {
            break;
        }
        match run.scene(index).await {
            Ok(record) => {
                run.scenes.push(record);
                if let Some(dir) = &options.checkpoint_dir {
                    let cp = Checkpoint {
                        version: CHECKPOINT_VERSION,
                        dyad_id: dyad.dyad_id.clone(),
                        run_index: options.run_index,
                        run_seed,
                        config: snapshot.clone(),
                        scenes: run.scenes.clone(),
                        agents: run.agents.clone(),
                        affect_cache: run.cache.clone(),
                        state: run.state,
                    };
                    if let Err(e) = write_checkpoint(dir, &cp) {
                        tracing::warn!(error = %e, "could not write checkpoint");
                    }
                }
            }
            Err(e) => {
                tracing::warn!(dyad = %dyad.dyad_id, run = options.run_index, scene = index, error = %e, "run aborted");
                trace.error = Some(format!("scene {index}: {e}"));
                break;
            }
        }
    }

    let done = run.scenes.len() as u32;
    if trace.error.is_none() && done < config.num_scenes {
        trace.terminated_early = true;
        trace.termination_reason = Some(format!("hard breakup marker in scene {}", done - 1));
    }
    trace.final_commitment = run.scenes.last().map(|s| s.commitment.clone());
    trace.scenes = run.scenes;
    trace
}

async fn fresh_run<'a>(
    gateway: &'a Gateway,
    bank: &'a ScenarioBank,
    dyad: &Dyad,
    config: &'a SimulationConfig,
    run_seed: u64,
    options: &RunOptions,
) -> Result<Run<'a>, SceneError> {
    if bank.is_empty() {
        return Err(SceneError::NoCandidates);
    }
    let mut cache = AffectCache::default();
    let mut make = async |partner: Partner, persona: &Persona| -> Result<AgentState, SceneError> {
        let store =
            MemoryStore::preload_identity(gateway, &mut cache, &identity_texts(persona)).await?;
        Ok(AgentState::new(partner, persona.clone(), store))
    };
    let a = make(Partner::A, &dyad.partner_a).await?;
    let b = make(Partner::B, &dyad.partner_b).await?;
    Ok(Run {
        gateway,
        bank,
        config,
        run_seed,
        hook: options.hook.clone(),
        agents: [a, b],
        cache,
        state: RelationshipState::default(),
        scenes: Vec::new(),
    })
}

impl Run<'_> {
    fn observe(&mut self, index: u32, line: &str) {
        for a in &mut self.agents {
            a.observe(line);
        }
        if let Some(h) = &self.hook {
            h.observe(index, line);
        }
    }

    async fn scene(&mut self, index: u32) -> Result<SceneRecord, SceneError> {
        let gw = self.gateway.scoped();
        let seed = derive_seed(&[&self.run_seed.to_le_bytes(), b"scene", &index.to_le_bytes()]);
        let call_seed = Some(seed);
        let mut warnings = Vec::new();
        let previous_summary = self
            .scenes
            .last()
            .map(|s| s.rolling_summary.clone())
            .unwrap_or_default();
        let previous_commitment = self.scenes.last().map(|s| s.commitment.clone());
        let [pa, pb] = [
            self.agents[0].persona.clone(),
            self.agents[1].persona.clone(),
        ];

        let priority = select_category(&self.state, index as usize);
        let candidate_seed = derive_seed(&[
            &self.run_seed.to_le_bytes(),
            b"candidates",
            &index.to_le_bytes(),
        ]);
        let (_, candidates) = sample_candidates(
            self.bank,
            &priority,
            self.config.candidate_pool,
            candidate_seed,
        )
        .map_err(|_| SceneError::NoCandidates)?;
        let scenario = steps::select_scenario(
            &gw,
            &candidates,
            &pa,
            &pb,
            &previous_summary,
            &self.state,
            call_seed,
            &mut warnings,
        )
        .await?
        .clone();
        let scene =
            steps::expand_scene(&gw, &scenario, &pa, &pb, &previous_summary, call_seed).await?;
        if let Some(h) = &self.hook {
            h.scene_started(index, &scene);
        }
        for a in &mut self.agents {
            a.memory.clear_scene();
        }

        let mut transcript: Vec<SceneEvent> = Vec::new();
        let mut lines: Vec<String> = Vec::new();
        let mut option_sets: Vec<OptionSet> = Vec::new();
        let mut decisions: Vec<Decision> = Vec::new();
        let mut progress = NarrationProgress {
            decisions: 0,
            max_decisions: self.config.max_decisions_per_scene,
            steps_since_decision: 0,
            max_steps: self.config.max_narration_steps,
            last_actor: None,
        };

        while progress.decisions < progress.max_decisions {
            let step = steps::advance_narrative(
                &gw,
                &scene,
                &pa,
                &pb,
                &lines,
                progress,
                call_seed,
                &mut warnings,
            )
            .await?;
            if !step.narration.is_empty() {
                let ev = SceneEvent::Narration {
                    id: event_id(index, transcript.len()),
                    text: step.narration.clone(),
                };
                let line = ev.render(&option_sets);
                transcript.push(ev);
                lines.push(line.clone());
                self.observe(index, &line);
                for a in &mut self.agents {
                    memory::record_scene_note(&gw, &mut a.memory, index, &step.narration, a.affect)
                        .await?;
                }
            }
            let actor = if step.stop {
                step.acting_partner.expect("stops name an actor")
            } else if step.scene_complete {
                if progress.decisions > 0 {
                    break;
                }
                warnings.push("scene completed before any decision; opening one".into());
                progress.round_robin()
            } else {
                progress.steps_since_decision += 1;
                continue;
            };

            let ai = actor.index();
            let options = steps::generate_options(
                &gw,
                &scene,
                &lines,
                &self.state,
                actor,
                &self.agents[ai].persona,
                call_seed,
            )
            .await?;
            let ev = SceneEvent::OptionsPresented {
                id: event_id(index, transcript.len()),
                option_set: option_sets.len(),
                acting_partner: actor,
            };
            option_sets.push(options.clone());
            let line = ev.render(&option_sets);
            transcript.push(ev);
            lines.push(line.clone());
            self.observe(index, &line);

            let context = format!(
                "{}\n\nYour goal: {}\n\nWhat has happened so far:\n{}",
                scene.render(),
                scene.goal(actor),
                lines.join("\n")
            );
            let params = DecisionParams {
                k: self.config.k,
                lambda: self.config.lambda,
                seed: call_seed,
            };
            let mut decision =
                agent::decide(&gw, &mut self.agents[ai], &context, &options, params).await?;
            if let Some(hook) = self.hook.clone().filter(|h| h.controls(actor)) {
                let shadow = decision.chosen_option_id.clone();
                let choice = hook
                    .choose(DecisionPoint {
                        scene_index: index,
                        options: options.clone(),
                        shadow_option_id: shadow.clone(),
                    })
                    .await
                    .map_err(SceneError::Human)?;
                let picked = options.get(&choice.option_id).ok_or_else(|| {
                    SceneError::Human(format!("unknown option {:?}", choice.option_id))
                })?;
                decision.chosen_option_id = picked.id.clone();
                decision.action_text = picked.description.clone();
                decision.reasoning = choice.rationale;
                decision.confidence = None;
                decision.emotion_tags = None;
                decision.controller = Controller::Human;
                decision.shadow_option_id = Some(shadow);
            }

            let ev = SceneEvent::Decision {
                id: event_id(index, transcript.len()),
                partner: actor,
                option_id: decision.chosen_option_id.clone(),
                action_text: decision.action_text.clone(),
            };
            let line = ev.render(&option_sets);
            transcript.push(ev);
            lines.push(line.clone());
            self.observe(index, &line);
            let chosen = &options
                .get(&decision.chosen_option_id)
                .expect("chosen id is presented")
                .description;
            let episode = format!(
                "Scene {} ({}): partner {actor} chose to {}.",
                index + 1,
                scene.category.label(),
                chosen.trim_end_matches('.').to_lowercase()
            );
            for a in &mut self.agents {
                agent::remember(&gw, a, &mut self.cache, index, &episode).await?;
            }
            decisions.push(decision);
            progress.decisions += 1;
            progress.steps_since_decision = 0;
            progress.last_actor = Some(actor);
        }

        let previous_state = self.state;
        let (state, confirmed) = steps::infer_states(
            &gw,
            &scene,
            &lines,
            &previous_state,
            call_seed,
            &mut warnings,
        )
        .await?;
        let commitment = steps::score_commitment(
            &gw,
            &scene,
            &lines,
            &state,
            previous_commitment.as_ref(),
            call_seed,
            &mut warnings,
        )
        .await?;
        let rolling_summary = steps::update_summary(
            &gw,
            &previous_summary,
            &scene,
            &lines,
            &state,
            call_seed,
            &mut warnings,
        )
        .await?;
        let previous_metrics = self.agents[0].metrics;
        let metrics = derive_metrics(&state, &commitment, &previous_metrics);
        for a in &mut self.agents {
            a.metrics = metrics;
        }
        self.state = state;
        let counts = gw.counts();
        let record = SceneRecord {
            index,
            category: scene.category,
            confirmed_category: confirmed,
            source_scenario_id: scene.source_scenario_id.clone(),
            scene_state: scene.scene_state.clone(),
            stakes: scene.stakes.clone(),
            third_party: scene.third_party.clone(),
            transcript,
            option_sets,
            decisions,
            inferred_state: state,
            commitment,
            rolling_summary,
            metrics,
            llm_call_count: counts.chat,
            embedding_call_count: counts.embed,
            warnings,
        };
        if let Some(h) = &self.hook {
            h.scene_finished(&record, &previous_state);
        }
        Ok(record)
    }
}
