//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use serde_json::{json, Value};

use relate_sim::domain::{Persona, Rule, TurningPointCategory};
use relate_sim::gateway::{Matcher, ScriptRule};
use relate_sim::prompts::{role, sec};
use relate_sim::scene::{Dyad, Scenario, ScenarioBank};

pub fn persona(tag: &str) -> Persona {
    Persona {
        narrative: format!("You are partner {tag}. You value honesty."),
        playbook: vec![Rule {
            condition: "your partner is upset".into(),
            action: "you ask what they need".into(),
        }],
        source_synopses: vec![],
    }
}

pub fn dyad(id: &str) -> Dyad {
    Dyad {
        dyad_id: id.into(),
        partner_a: persona("A"),
        partner_b: persona("B"),
    }
}

/// One scenario per category, so selection never needs a model call.
pub fn one_per_category() -> ScenarioBank {
    ScenarioBank::new(
        TurningPointCategory::ALL
            .iter()
            .enumerate()
            .map(|(i, c)| Scenario {
                id: format!("sc-{i}"),
                category: *c,
                synopsis: format!("synopsis {i}"),
                tags: vec![],
            })
            .collect(),
    )
    .unwrap()
}

pub fn options_reply(actor: &str, n: usize) -> Value {
    let opts: Vec<Value> = (1..=n)
        .map(|i| json!({ "description": format!("option {i} for {actor}"), "actor": actor }))
        .collect();
    json!({ "acting_partner": actor, "options": opts })
}

pub fn state_reply() -> Value {
    json!({
        "conflict": "brewing", "repair_outcome": "none", "clarity": "tacit",
        "constraints": "emerging", "alternatives": "quiet", "transition": "none",
        "network": "supportive", "breakup_marker": "none"
    })
}

/// Repeating rules for scenes with a single decision by partner A, whose
/// agent always picks `o2`.
pub fn loop_rules() -> Vec<ScriptRule> {
    let affect = json!({"joy": 0.2, "sadness": 0.1, "fear": 0.1, "surprise": 0.0,
        "anger": 0.1, "disgust": 0.0, "trust": 0.6, "anticipation": 0.3});
    vec![
        ScriptRule::json(role::AFFECT_EMBEDDING, json!({ "affect": affect })).repeating(),
        ScriptRule::json(
            role::APPRAISAL,
            json!({ "affect": affect, "internal_thought": "steady" }),
        )
        .repeating(),
        ScriptRule::json(
            role::SCENE_EXPANSION,
            json!({
                "theme": "t", "setting": "kitchen", "NPC": [], "current_scene": "dinner",
                "character_1_goal": "g1", "character_2_goal": "g2",
                "scene_conflict": "who cooks", "stakes": "s", "third_party": null
            }),
        )
        .repeating(),
        ScriptRule::json(
            role::NARRATION,
            json!({"narration": "They sit down.", "stop": true, "acting_partner": "A"}),
        )
        .when(Matcher::section(sec::PROGRESS, "decisions so far: 0"))
        .repeating(),
        ScriptRule::json(
            role::NARRATION,
            json!({"narration": "The evening ends.", "stop": false, "scene_complete": true}),
        )
        .repeating(),
        ScriptRule::json(role::OPTIONS, options_reply("A", 3)).repeating(),
        ScriptRule::json(
            role::DECISION,
            json!({"action": "o2: option 2", "reasoning": "fits", "option_id": "o2"}),
        )
        .repeating(),
        ScriptRule::json(role::STATE_INFERENCE, state_reply()).repeating(),
        ScriptRule::json(
            role::COMMITMENT,
            json!({"score": 3.5, "rationale": "steady", "evidence_refs": []}),
        )
        .repeating(),
        ScriptRule::json(
            role::ROLLING_SUMMARY,
            json!({"summary": "They shared dinner."}),
        )
        .repeating(),
    ]
}
