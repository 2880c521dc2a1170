//! Per-scene records, run traces and their canonical line-oriented form.
//!
//! A trace file holds one JSON object per line: a `header` record, one
//! `scene` record per completed scene, and a closing `footer` record.
//! Serialization is canonical: fields are emitted in declaration order and
//! floats use the shortest round-tripping representation, so
//! `parse → serialize` reproduces the original bytes.

use serde::{Deserialize, Serialize};

use super::affect::AffectVector;
use super::state::RelationshipState;
use super::tokens::{token_enum, Partner, TurningPointCategory};
use super::types::{CommitmentEstimate, OptionSet, Persona, RelationshipMetrics, SceneState};

token_enum! {
    /// Who made a decision.
    pub enum Controller: "controller" {
        Agent => "agent",
        Human => "human",
    }
}

/// One event in a scene transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SceneEvent {
    Narration {
        id: String,
        text: String,
    },
    OptionsPresented {
        id: String,
        option_set: usize,
        acting_partner: Partner,
    },
    Decision {
        id: String,
        partner: Partner,
        option_id: String,
        action_text: String,
    },
}

impl SceneEvent {
    pub fn id(&self) -> &str {
        match self {
            SceneEvent::Narration { id, .. }
            | SceneEvent::OptionsPresented { id, .. }
            | SceneEvent::Decision { id, .. } => id,
        }
    }

    /// One-line rendering used inside prompts.
    pub fn render(&self, option_sets: &[OptionSet]) -> String {
        match self {
            SceneEvent::Narration { id, text } => format!("[{id}] NARRATION: {text}"),
            SceneEvent::OptionsPresented {
                id,
                option_set,
                acting_partner,
            } => {
                let listed = option_sets
                    .get(*option_set)
                    .map(|s| {
                        s.options
                            .iter()
                            .map(|o| format!("{}: {}", o.id, o.description))
                            .collect::<Vec<_>>()
                            .join(" | ")
                    })
                    .unwrap_or_default();
                format!("[{id}] OPTIONS for partner {acting_partner}: {listed}")
            }
            SceneEvent::Decision {
                id,
                partner,
                option_id,
                action_text,
            } => format!("[{id}] DECISION by partner {partner} ({option_id}): {action_text}"),
        }
    }
}

pub fn event_id(scene: u32, seq: usize) -> String {
    format!("s{scene}-e{seq}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub partner: Partner,
    pub chosen_option_id: String,
    pub action_text: String,
    pub reasoning: String,
    pub confidence: Option<f64>,
    pub emotion_tags: Option<Vec<String>>,
    pub controller: Controller,
    /// The agent's own pick when a human made the decision.
    pub shadow_option_id: Option<String>,
    pub internal_thought: String,
    pub affect: AffectVector,
    pub retrieved_memory_ids: Vec<String>,
    /// Rendered decision prompt, verbatim.
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub index: u32,
    pub category: TurningPointCategory,
    pub confirmed_category: Option<TurningPointCategory>,
    pub source_scenario_id: String,
    pub scene_state: SceneState,
    pub stakes: String,
    pub third_party: Option<String>,
    pub transcript: Vec<SceneEvent>,
    pub option_sets: Vec<OptionSet>,
    pub decisions: Vec<Decision>,
    pub inferred_state: RelationshipState,
    pub commitment: CommitmentEstimate,
    pub rolling_summary: String,
    pub metrics: RelationshipMetrics,
    pub llm_call_count: u32,
    pub embedding_call_count: u32,
    pub warnings: Vec<String>,
}

/// Run parameters recorded with every trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub num_scenes: u32,
    pub k: usize,
    pub lambda: f64,
    pub candidate_pool: usize,
    pub max_narration_steps: u32,
    pub max_decisions_per_scene: u32,
    pub backend: String,
    pub embedding_dimension: usize,
    pub commitment_rubric: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub dyad_id: String,
    pub run_index: u32,
    pub run_seed: u64,
    pub config: ConfigSnapshot,
    pub partner_a: Persona,
    pub partner_b: Persona,
    pub scenes: Vec<SceneRecord>,
    pub final_commitment: Option<CommitmentEstimate>,
    pub terminated_early: bool,
    pub termination_reason: Option<String>,
    /// Set when the run aborted on an unrecoverable error; such traces are invalid.
    pub error: Option<String>,
}

impl SimulationTrace {
    pub fn is_complete(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TraceHeader {
    dyad_id: String,
    run_index: u32,
    run_seed: u64,
    config: ConfigSnapshot,
    partner_a: Persona,
    partner_b: Persona,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TraceFooter {
    final_commitment: Option<CommitmentEstimate>,
    terminated_early: bool,
    termination_reason: Option<String>,
    error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum TraceLine {
    Header(TraceHeader),
    Scene(Box<SceneRecord>),
    Footer(TraceFooter),
}

#[derive(Debug, thiserror::Error)]
pub enum TraceFormatError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: expected {expected} record")]
    Structure { line: usize, expected: &'static str },
}

impl SimulationTrace {
    /// Canonical line-oriented form; every line ends with `\n`.
    pub fn to_canonical(&self) -> String {
        let mut lines = Vec::with_capacity(self.scenes.len() + 2);
        lines.push(TraceLine::Header(TraceHeader {
            dyad_id: self.dyad_id.clone(),
            run_index: self.run_index,
            run_seed: self.run_seed,
            config: self.config.clone(),
            partner_a: self.partner_a.clone(),
            partner_b: self.partner_b.clone(),
        }));
        for scene in &self.scenes {
            lines.push(TraceLine::Scene(Box::new(scene.clone())));
        }
        lines.push(TraceLine::Footer(TraceFooter {
            final_commitment: self.final_commitment.clone(),
            terminated_early: self.terminated_early,
            termination_reason: self.termination_reason.clone(),
            error: self.error.clone(),
        }));
        let mut out = String::new();
        for line in &lines {
            out.push_str(&serde_json::to_string(line).expect("trace records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_canonical(text: &str) -> Result<Self, TraceFormatError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str::<TraceLine>(l)
                    .map(|rec| (i + 1, rec))
                    .map_err(|source| TraceFormatError::Json {
                        line: i + 1,
                        source,
                    })
            });
        let header = match lines.next().transpose()? {
            Some((_, TraceLine::Header(h))) => h,
            Some((line, _)) => {
                return Err(TraceFormatError::Structure {
                    line,
                    expected: "header",
                })
            }
            None => {
                return Err(TraceFormatError::Structure {
                    line: 1,
                    expected: "header",
                })
            }
        };
        let mut scenes = Vec::new();
        let mut footer = None;
        let mut last_line = 1;
        for item in lines {
            let (line, rec) = item?;
            last_line = line;
            if footer.is_some() {
                return Err(TraceFormatError::Structure {
                    line,
                    expected: "end of trace",
                });
            }
            match rec {
                TraceLine::Scene(s) => scenes.push(*s),
                TraceLine::Footer(f) => footer = Some(f),
                TraceLine::Header(_) => {
                    return Err(TraceFormatError::Structure {
                        line,
                        expected: "scene or footer",
                    })
                }
            }
        }
        let footer = footer.ok_or(TraceFormatError::Structure {
            line: last_line + 1,
            expected: "footer",
        })?;
        Ok(SimulationTrace {
            dyad_id: header.dyad_id,
            run_index: header.run_index,
            run_seed: header.run_seed,
            config: header.config,
            partner_a: header.partner_a,
            partner_b: header.partner_b,
            scenes,
            final_commitment: footer.final_commitment,
            terminated_early: footer.terminated_early,
            termination_reason: footer.termination_reason,
            error: footer.error,
        })
    }
}
