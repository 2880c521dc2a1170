use serde::{Deserialize, Serialize};

use super::affect::AffectVector;
use super::tokens::{token_enum, Partner};

/// Scene state dictionary; the single source of truth for one scene.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneState {
    pub theme: String,
    pub setting: String,
    #[serde(rename = "NPC")]
    pub npcs: Vec<String>,
    pub current_scene: String,
    pub previous_summary: String,
    pub character_1_goal: String,
    pub character_2_goal: String,
    pub scene_conflict: String,
}

/// One if→then behavior rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub condition: String,
    pub action: String,
}

token_enum! {
    /// Source instrument of a baseline document.
    pub enum InstrumentKind: "instrument kind" {
        Ctss => "ctss",
        Ersi => "ersi",
        Rpd => "rpd",
        SelfReport => "self",
        Sfn => "sfn",
        Vplst => "vplst",
        Other => "other",
    }
}

impl InstrumentKind {
    pub fn describe(self) -> &'static str {
        match self {
            Self::Ctss => "partner and self description of the subject in conflict",
            Self::Ersi => "attention, task and stress traits",
            Self::Rpd => "partner's view of the subject's daily life",
            Self::SelfReport => "demographic and relationship identity",
            Self::Sfn => "partner's view of the subject's friends and interests",
            Self::Vplst => "sources of tension and control",
            Self::Other => "other baseline source",
        }
    }
}

token_enum! {
    pub enum Reporter: "reporter" {
        SelfReported => "self",
        Partner => "partner",
    }
}

/// One baseline instrument document for one subject.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstrumentDoc {
    pub kind: InstrumentKind,
    pub subject_id: String,
    pub reporter: Reporter,
    pub text: String,
}

/// Short evidence-linked synopsis of one instrument.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstrumentSynopsis {
    pub kind: InstrumentKind,
    #[serde(default)]
    pub reporter: Option<Reporter>,
    pub text: String,
    pub evidence: Vec<String>,
}

/// Second-person persona narrative plus its if→then playbook.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Persona {
    pub narrative: String,
    pub playbook: Vec<Rule>,
    #[serde(default)]
    pub source_synopses: Vec<InstrumentSynopsis>,
}

impl Persona {
    /// Persona text as shown to models: narrative followed by the playbook.
    pub fn render(&self) -> String {
        let mut out = self.narrative.trim().to_string();
        if !self.playbook.is_empty() {
            out.push_str("\n\nPlaybook:");
            for rule in &self.playbook {
                out.push_str(&format!("\n- If {}, then {}", rule.condition, rule.action));
            }
        }
        out
    }
}

token_enum! {
    pub enum MemoryLayer: "memory layer" {
        Identity => "identity",
        Simulation => "simulation",
        Scene => "scene",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub id: String,
    pub layer: MemoryLayer,
    pub text: String,
    pub semantic_embedding: Vec<f64>,
    pub affect_embedding: AffectVector,
    pub created_at_scene: Option<u32>,
}

/// Momentary dedication / alternatives / investments proxies, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelationshipMetrics {
    pub dedication: f64,
    pub alternatives: f64,
    pub investments: f64,
}

impl Default for RelationshipMetrics {
    fn default() -> Self {
        Self::new(0.5, 0.5, 0.5)
    }
}

impl RelationshipMetrics {
    pub fn new(dedication: f64, alternatives: f64, investments: f64) -> Self {
        let clamp = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        Self {
            dedication: clamp(dedication),
            alternatives: clamp(alternatives),
            investments: clamp(investments),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionOption {
    pub id: String,
    pub description: String,
    pub actor: Partner,
}

/// The 3–4 single-actor options offered at one decision point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionSet {
    pub options: Vec<ActionOption>,
    pub acting_partner: Partner,
}

pub const MIN_OPTIONS: usize = 3;
pub const MAX_OPTIONS: usize = 4;

impl OptionSet {
    /// Invariant violations, empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let n = self.options.len();
        if !(MIN_OPTIONS..=MAX_OPTIONS).contains(&n) {
            out.push(format!(
                "options length {n} ∉ [{MIN_OPTIONS},{MAX_OPTIONS}]"
            ));
        }
        for (i, o) in self.options.iter().enumerate() {
            if o.actor != self.acting_partner {
                out.push(format!(
                    "option {} actor {} differs from acting partner {}",
                    o.id, o.actor, self.acting_partner
                ));
            }
            if o.description.trim().is_empty() {
                out.push(format!("option {} has an empty description", o.id));
            }
            for other in &self.options[..i] {
                if other.id == o.id {
                    out.push(format!("duplicate option id {}", o.id));
                }
                if normalize_ws(&other.description)
                    .eq_ignore_ascii_case(&normalize_ws(&o.description))
                {
                    out.push(format!(
                        "options {} and {} have the same description",
                        other.id, o.id
                    ));
                }
            }
        }
        out
    }

    pub fn get(&self, id: &str) -> Option<&ActionOption> {
        self.options.iter().find(|o| o.id == id)
    }

    pub fn ids(&self) -> Vec<&str> {
        self.options.iter().map(|o| o.id.as_str()).collect()
    }
}

pub(crate) fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Lowest and highest admissible commitment scores.
pub const COMMITMENT_MIN: f64 = 1.0;
pub const COMMITMENT_MAX: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitmentEstimate {
    pub score: f64,
    pub rationale: String,
    pub evidence_refs: Vec<String>,
}

impl CommitmentEstimate {
    /// Clamps `score` into the commitment range. The second value is true
    /// when the score had to be adjusted.
    pub fn clamped(score: f64, rationale: String, evidence_refs: Vec<String>) -> (Self, bool) {
        let fixed = if score.is_nan() {
            COMMITMENT_MIN
        } else {
            score.clamp(COMMITMENT_MIN, COMMITMENT_MAX)
        };
        (
            Self {
                score: fixed,
                rationale,
                evidence_refs,
            },
            fixed != score,
        )
    }
}
