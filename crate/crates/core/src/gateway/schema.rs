//! Named response schemas and a small structural validator.
//!
//! Schemas describe the JSON object a model must return for one pipeline
//! step. Validation is structural (required keys, value kinds); domain
//! rules such as option counts are checked by the calling step.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde_json::Value;

#[derive(Debug, Clone, PartialEq)]
pub enum FieldKind {
    String,
    Number,
    Boolean,
    StringList,
    /// Object whose values are all numbers; keys are free.
    NumberMap,
    Object(Vec<FieldSpec>),
    ObjectList(Vec<FieldSpec>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    pub name: String,
    pub kind: FieldKind,
    pub required: bool,
    /// Optional fields may also be JSON `null`.
    pub nullable: bool,
}

impl FieldSpec {
    pub fn required(name: &str, kind: FieldKind) -> Self {
        Self {
            name: name.to_string(),
            kind,
            required: true,
            nullable: false,
        }
    }

    pub fn optional(name: &str, kind: FieldKind) -> Self {
        Self {
            name: name.to_string(),
            kind,
            required: false,
            nullable: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSchema {
    pub name: String,
    pub fields: Vec<FieldSpec>,
}

impl ResponseSchema {
    pub fn new(name: &str, fields: Vec<FieldSpec>) -> Self {
        Self {
            name: name.to_string(),
            fields,
        }
    }

    pub fn validate(&self, value: &Value) -> Result<(), String> {
        validate_object(value, &self.fields, "$")
    }

    /// Compact human-readable shape, e.g. `{"score": number, "rationale": string}`.
    pub fn describe(&self) -> String {
        describe_fields(&self.fields)
    }
}

fn describe_fields(fields: &[FieldSpec]) -> String {
    let mut out = String::from("{");
    for (i, f) in fields.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "\"{}\": {}", f.name, describe_kind(&f.kind));
        if !f.required {
            out.push_str(" (optional)");
        }
    }
    out.push('}');
    out
}

fn describe_kind(kind: &FieldKind) -> String {
    match kind {
        FieldKind::String => "string".into(),
        FieldKind::Number => "number".into(),
        FieldKind::Boolean => "boolean".into(),
        FieldKind::StringList => "[string]".into(),
        FieldKind::NumberMap => "{name: number}".into(),
        FieldKind::Object(f) => describe_fields(f),
        FieldKind::ObjectList(f) => format!("[{}]", describe_fields(f)),
    }
}

fn validate_object(value: &Value, fields: &[FieldSpec], path: &str) -> Result<(), String> {
    let obj = value
        .as_object()
        .ok_or_else(|| format!("{path} must be an object"))?;
    for f in fields {
        let p = format!("{path}.{}", f.name);
        match obj.get(&f.name) {
            None if f.required => return Err(format!("missing required field {p}")),
            None => {}
            Some(Value::Null) if f.nullable => {}
            Some(v) => validate_kind(v, &f.kind, &p)?,
        }
    }
    Ok(())
}

fn validate_kind(v: &Value, kind: &FieldKind, path: &str) -> Result<(), String> {
    let ok = match kind {
        FieldKind::String => v.is_string(),
        FieldKind::Number => v.is_number(),
        FieldKind::Boolean => v.is_boolean(),
        FieldKind::StringList => v.as_array().is_some_and(|a| a.iter().all(Value::is_string)),
        FieldKind::NumberMap => v
            .as_object()
            .is_some_and(|o| o.values().all(Value::is_number)),
        FieldKind::Object(fields) => return validate_object(v, fields, path),
        FieldKind::ObjectList(fields) => {
            let arr = v
                .as_array()
                .ok_or_else(|| format!("{path} must be an array"))?;
            for (i, item) in arr.iter().enumerate() {
                validate_object(item, fields, &format!("{path}[{i}]"))?;
            }
            true
        }
    };
    if ok {
        Ok(())
    } else {
        Err(format!("{path} must be {}", describe_kind(kind)))
    }
}

/// Extracts the first JSON object from model output, tolerating code
/// fences and surrounding prose.
pub fn extract_json(raw: &str) -> Result<Value, String> {
    let trimmed = raw.trim();
    if let Ok(v) = serde_json::from_str::<Value>(trimmed) {
        return Ok(v);
    }
    let start = trimmed
        .find('{')
        .ok_or_else(|| "no JSON object in response".to_string())?;
    let mut de = serde_json::Deserializer::from_str(&trimmed[start..]).into_iter::<Value>();
    match de.next() {
        Some(Ok(v)) => Ok(v),
        Some(Err(e)) => Err(format!("malformed JSON: {e}")),
        None => Err("no JSON object in response".into()),
    }
}

pub mod names {
    pub const INSTRUMENT_SYNOPSIS: &str = "instrument_synopsis";
    pub const PERSONA: &str = "persona";
    pub const COMMITMENT: &str = "commitment";
    pub const APPRAISAL: &str = "appraisal";
    pub const AFFECT_SCORES: &str = "affect_scores";
    pub const DECISION: &str = "decision";
    pub const SCENARIO_CHOICE: &str = "scenario_choice";
    pub const SCENE_EXPANSION: &str = "scene_expansion";
    pub const NARRATION_STEP: &str = "narration_step";
    pub const OPTION_SET: &str = "option_set";
    pub const RELATIONSHIP_STATE: &str = "relationship_state";
    pub const SUMMARY: &str = "summary";
    pub const OUTCOME_PREDICTION: &str = "outcome_prediction";
}

/// Schemas for every pipeline step.
pub fn builtin_schemas() -> BTreeMap<String, ResponseSchema> {
    use FieldKind::*;
    let req = FieldSpec::required;
    let opt = FieldSpec::optional;
    let commitment = vec![
        req("score", Number),
        req("rationale", String),
        opt("evidence_refs", StringList),
    ];
    let schemas = vec![
        ResponseSchema::new(
            names::INSTRUMENT_SYNOPSIS,
            vec![req("synopsis", String), req("evidence", StringList)],
        ),
        ResponseSchema::new(
            names::PERSONA,
            vec![
                req("narrative", String),
                req(
                    "playbook",
                    ObjectList(vec![req("condition", String), req("action", String)]),
                ),
            ],
        ),
        ResponseSchema::new(names::COMMITMENT, commitment),
        ResponseSchema::new(
            names::APPRAISAL,
            vec![req("affect", NumberMap), req("internal_thought", String)],
        ),
        ResponseSchema::new(names::AFFECT_SCORES, vec![req("affect", NumberMap)]),
        ResponseSchema::new(
            names::DECISION,
            vec![
                req("action", String),
                req("reasoning", String),
                opt("option_id", String),
                opt("confidence", Number),
                opt("emotion_tags", StringList),
            ],
        ),
        ResponseSchema::new(
            names::SCENARIO_CHOICE,
            vec![req("scenario_id", String), opt("reason", String)],
        ),
        ResponseSchema::new(
            names::SCENE_EXPANSION,
            vec![
                req("theme", String),
                req("setting", String),
                req("NPC", StringList),
                req("current_scene", String),
                req("character_1_goal", String),
                req("character_2_goal", String),
                req("scene_conflict", String),
                req("stakes", String),
                opt("third_party", String),
            ],
        ),
        ResponseSchema::new(
            names::NARRATION_STEP,
            vec![
                req("narration", String),
                req("stop", Boolean),
                opt("acting_partner", String),
                opt("scene_complete", Boolean),
            ],
        ),
        ResponseSchema::new(
            names::OPTION_SET,
            vec![
                req("acting_partner", String),
                req(
                    "options",
                    ObjectList(vec![req("description", String), req("actor", String)]),
                ),
            ],
        ),
        ResponseSchema::new(
            names::RELATIONSHIP_STATE,
            vec![
                req("conflict", String),
                req("repair_outcome", String),
                req("clarity", String),
                req("constraints", String),
                req("alternatives", String),
                req("transition", String),
                req("network", String),
                req("breakup_marker", String),
                opt("category", String),
            ],
        ),
        ResponseSchema::new(names::SUMMARY, vec![req("summary", String)]),
        ResponseSchema::new(
            names::OUTCOME_PREDICTION,
            vec![req("label", String), opt("rationale", String)],
        ),
    ];
    schemas.into_iter().map(|s| (s.name.clone(), s)).collect()
}
