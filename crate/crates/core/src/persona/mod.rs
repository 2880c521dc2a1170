//! Two-stage persona synthesis from baseline instruments, plus the
//! personas-only baseline commitment estimate.
//!
//! Stage one condenses each instrument into an evidence-linked synopsis;
//! stage two fuses the synopses into a second-person narrative and an
//! if→then playbook. Only baseline documents are accepted as input.

pub mod synthetic;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::Value;
use tokio::task::JoinSet;

use crate::domain::{
    normalize_ws, CommitmentEstimate, InstrumentDoc, InstrumentSynopsis, Persona, Rule,
};
use crate::gateway::schema::names;
use crate::gateway::{Gateway, GatewayError, PromptSpec};
use crate::prompts::{self, role, sec};
use crate::util::word_count;

pub const NARRATIVE_MIN_WORDS: usize = 200;
pub const NARRATIVE_MAX_WORDS: usize = 300;
pub const PLAYBOOK_MIN_RULES: usize = 5;
pub const PLAYBOOK_MAX_RULES: usize = 7;

/// Repair attempts allowed for an out-of-band persona.
const FUSION_REPAIRS: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum PersonaError {
    #[error("instrument document {0} has no text")]
    EmptyDocument(String),
    #[error("no synopses to fuse")]
    NoSynopses,
    #[error("persona failed validation: {0}")]
    Validation(String),
    #[error(transparent)]
    Gateway(GatewayError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl From<GatewayError> for PersonaError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::Rejected { reason, .. } => PersonaError::Validation(reason),
            other => PersonaError::Gateway(other),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> PersonaError {
    PersonaError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Stage one: one chat call producing a synopsis whose evidence snippets
/// are verified against the source. Snippets not found verbatim (after
/// whitespace normalization) are dropped and reported as warnings.
pub async fn summarize_instrument(
    gateway: &Gateway,
    doc: &InstrumentDoc,
    seed: Option<u64>,
) -> Result<(InstrumentSynopsis, Vec<String>), PersonaError> {
    if doc.text.trim().is_empty() {
        return Err(PersonaError::EmptyDocument(format!(
            "{}/{}",
            doc.subject_id, doc.kind
        )));
    }
    let spec = PromptSpec::new(role::INSTRUMENT_SUMMARY, names::INSTRUMENT_SYNOPSIS)
        .seed(seed)
        .temperature(0.2)
        .section(sec::TASK, prompts::INSTRUMENT_SUMMARY_TASK)
        .section(
            sec::INSTRUMENT,
            format!(
                "{} ({}), reported by {}",
                doc.kind,
                doc.kind.describe(),
                doc.reporter
            ),
        )
        .section(sec::DOCUMENT, doc.text.clone())
        .section(sec::OUTPUT, prompts::INSTRUMENT_SUMMARY_OUTPUT);
    let v = gateway.chat(&spec).await?.into_value()?;
    let source = normalize_ws(&doc.text);
    let mut warnings = Vec::new();
    let mut evidence = Vec::new();
    for snippet in v["evidence"]
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(Value::as_str)
    {
        let norm = normalize_ws(snippet);
        if !norm.is_empty() && source.contains(&norm) {
            evidence.push(snippet.to_string());
        } else {
            let w = format!(
                "dropped evidence not found in {} document: {snippet:?}",
                doc.kind
            );
            tracing::warn!(subject = %doc.subject_id, "{w}");
            warnings.push(w);
        }
    }
    Ok((
        InstrumentSynopsis {
            kind: doc.kind,
            reporter: Some(doc.reporter),
            text: v["synopsis"]
                .as_str()
                .unwrap_or_default()
                .trim()
                .to_string(),
            evidence,
        },
        warnings,
    ))
}

/// Narrative and playbook bounds, inclusive.
pub fn check_persona_parts(narrative: &str, playbook: &[Rule]) -> Result<(), String> {
    let words = word_count(narrative);
    if !(NARRATIVE_MIN_WORDS..=NARRATIVE_MAX_WORDS).contains(&words) {
        return Err(format!(
            "narrative has {words} words; it must have {NARRATIVE_MIN_WORDS}-{NARRATIVE_MAX_WORDS}"
        ));
    }
    if !(PLAYBOOK_MIN_RULES..=PLAYBOOK_MAX_RULES).contains(&playbook.len()) {
        return Err(format!(
            "playbook has {} rules; it must have {PLAYBOOK_MIN_RULES}-{PLAYBOOK_MAX_RULES}",
            playbook.len()
        ));
    }
    if let Some(i) = playbook
        .iter()
        .position(|r| r.condition.trim().is_empty() || r.action.trim().is_empty())
    {
        return Err(format!(
            "playbook rule {} has an empty condition or action",
            i + 1
        ));
    }
    Ok(())
}

fn parse_persona(v: Value) -> Result<(String, Vec<Rule>), String> {
    let narrative = v["narrative"]
        .as_str()
        .unwrap_or_default()
        .trim()
        .to_string();
    let playbook: Vec<Rule> = serde_json::from_value(v["playbook"].clone())
        .map_err(|e| format!("playbook is malformed: {e}"))?;
    check_persona_parts(&narrative, &playbook)?;
    Ok((narrative, playbook))
}

pub fn render_synopses(synopses: &[InstrumentSynopsis]) -> String {
    synopses
        .iter()
        .map(|s| {
            let who = s
                .reporter
                .map(|r| format!("{r} report"))
                .unwrap_or_else(|| "report".into());
            let mut line = format!("- [{} / {who}] {}", s.kind, s.text);
            if !s.evidence.is_empty() {
                let quoted: Vec<String> = s.evidence.iter().map(|e| format!("{e:?}")).collect();
                line.push_str(&format!("\n  evidence: {}", quoted.join("; ")));
            }
            line
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Stage two: fuses synopses into a validated persona. An out-of-band
/// narrative or playbook gets one repair retry, then fails.
pub async fn fuse_persona(
    gateway: &Gateway,
    synopses: &[InstrumentSynopsis],
    seed: Option<u64>,
) -> Result<Persona, PersonaError> {
    if synopses.is_empty() {
        return Err(PersonaError::NoSynopses);
    }
    let spec = PromptSpec::new(role::PERSONA_FUSION, names::PERSONA)
        .seed(seed)
        .temperature(0.4)
        .section(sec::TASK, prompts::PERSONA_FUSION_TASK)
        .section(sec::SYNOPSES, render_synopses(synopses))
        .section(sec::OUTPUT, prompts::PERSONA_FUSION_OUTPUT);
    let (narrative, playbook) = gateway
        .chat_checked(&spec, FUSION_REPAIRS, parse_persona)
        .await?;
    Ok(Persona {
        narrative,
        playbook,
        source_synopses: synopses.to_vec(),
    })
}

/// Summarizes every document of one subject, then fuses.
pub async fn synthesize_persona(
    gateway: &Gateway,
    docs: &[InstrumentDoc],
    seed: Option<u64>,
) -> Result<(Persona, Vec<String>), PersonaError> {
    let mut synopses = Vec::with_capacity(docs.len());
    let mut warnings = Vec::new();
    for doc in docs {
        let (s, w) = summarize_instrument(gateway, doc, seed).await?;
        synopses.push(s);
        warnings.extend(w);
    }
    Ok((fuse_persona(gateway, &synopses, seed).await?, warnings))
}

/// Synthesizes many subjects concurrently; the gateway's in-flight limit
/// bounds actual model traffic. Results are keyed by subject id.
pub async fn synthesize_all(
    gateway: &Gateway,
    subjects: BTreeMap<String, Vec<InstrumentDoc>>,
    seed: Option<u64>,
) -> BTreeMap<String, Result<Persona, PersonaError>> {
    let mut set = JoinSet::new();
    for (id, docs) in subjects {
        let gw = gateway.clone();
        set.spawn(async move {
            let r = synthesize_persona(&gw, &docs, seed).await.map(|(p, _)| p);
            (id, r)
        });
    }
    let mut out = BTreeMap::new();
    while let Some(joined) = set.join_next().await {
        let (id, r) = joined.expect("persona task panicked");
        out.insert(id, r);
    }
    out
}

/// Personas-only commitment estimate. Scores outside [1,5] are clamped with
/// a warning.
pub async fn infer_baseline_commitment(
    gateway: &Gateway,
    persona_a: &Persona,
    persona_b: &Persona,
    seed: Option<u64>,
) -> Result<(CommitmentEstimate, Vec<String>), PersonaError> {
    let spec = PromptSpec::new(role::BASELINE_COMMITMENT, names::COMMITMENT)
        .seed(seed)
        .section(sec::TASK, prompts::BASELINE_COMMITMENT_TASK)
        .section(sec::RUBRIC, prompts::COMMITMENT_RUBRIC)
        .section(sec::PERSONA_A, persona_a.render())
        .section(sec::PERSONA_B, persona_b.render())
        .section(sec::OUTPUT, prompts::COMMITMENT_OUTPUT);
    let v = gateway.chat(&spec).await?.into_value()?;
    Ok(commitment_from_value(&v))
}

/// Builds a clamped estimate from a commitment-schema value.
pub(crate) fn commitment_from_value(v: &Value) -> (CommitmentEstimate, Vec<String>) {
    let raw = v["score"].as_f64().unwrap_or(f64::NAN);
    let refs = v["evidence_refs"]
        .as_array()
        .map(|a| {
            a.iter()
                .filter_map(Value::as_str)
                .map(str::to_string)
                .collect()
        })
        .unwrap_or_default();
    let rationale = v["rationale"].as_str().unwrap_or_default().to_string();
    let (est, adjusted) = CommitmentEstimate::clamped(raw, rationale, refs);
    let mut warnings = Vec::new();
    if adjusted {
        let w = format!(
            "commitment score {raw} outside [1,5]; clamped to {}",
            est.score
        );
        tracing::warn!("{w}");
        warnings.push(w);
    }
    (est, warnings)
}

/// Reads `dir/<subject_id>/*.json`, one instrument document per file, in
/// file-name order.
pub fn load_instrument_dir(
    dir: &Path,
) -> Result<BTreeMap<String, Vec<InstrumentDoc>>, PersonaError> {
    let mut out = BTreeMap::new();
    let mut subjects: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subjects.sort();
    for sub in subjects {
        let id = sub
            .file_name()
            .unwrap_or_default()
            .to_string_lossy()
            .to_string();
        let mut files: Vec<PathBuf> = std::fs::read_dir(&sub)
            .map_err(|e| io_err(&sub, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        let mut docs = Vec::new();
        for f in files {
            let text = std::fs::read_to_string(&f).map_err(|e| io_err(&f, e))?;
            let doc: InstrumentDoc = serde_json::from_str(&text).map_err(|e| io_err(&f, e))?;
            if doc.subject_id != id {
                return Err(io_err(
                    &f,
                    format!(
                        "subject_id {:?} does not match directory {id:?}",
                        doc.subject_id
                    ),
                ));
            }
            docs.push(doc);
        }
        if !docs.is_empty() {
            out.insert(id, docs);
        }
    }
    Ok(out)
}

/// Writes one instrument per file under `dir/<subject_id>/`.
pub fn write_instrument_docs(dir: &Path, docs: &[InstrumentDoc]) -> Result<(), PersonaError> {
    for doc in docs {
        let sub = dir.join(&doc.subject_id);
        std::fs::create_dir_all(&sub).map_err(|e| io_err(&sub, e))?;
        let path = sub.join(format!("{}-{}.json", doc.kind, doc.reporter));
        let body = serde_json::to_string(doc).expect("documents serialize");
        std::fs::write(&path, body + "\n").map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

pub fn write_persona(path: &Path, persona: &Persona) -> Result<(), PersonaError> {
    let body = serde_json::to_string(persona).expect("personas serialize");
    std::fs::write(path, body + "\n").map_err(|e| io_err(path, e))
}

pub fn read_persona(path: &Path) -> Result<Persona, PersonaError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}
