//! Golden fixtures: the decision prompt, the end-state prompts, and a full
//! three-scene mock run. Set `UPDATE_GOLDEN=1` to rewrite the fixtures after
//! an intended change, then review the diff.

mod common;

use std::path::PathBuf;

use serde_json::json;

use relate_sim::agent::assemble_decision_prompt;
use relate_sim::domain::{ActionOption, OptionSet, Partner, SimulationTrace};
use relate_sim::eval::{personas_only_prompt, simulation_aware_prompt};
use relate_sim::memory::RetrievalResult;
use relate_sim::runner::{build_gateway, BackendKind};
use relate_sim::scene::{generate_bank, run_simulation, RunOptions, SimulationConfig};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// Compares `actual` with the named fixture, or rewrites it on request.
fn check_golden(name: &str, actual: &str) {
    let path = fixture(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let want = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("missing fixture {}: {e}", path.display()));
    if want != actual {
        let line = want
            .lines()
            .zip(actual.lines())
            .position(|(a, b)| a != b)
            .map_or_else(|| "length".to_string(), |i| format!("line {}", i + 1));
        panic!("{name} differs from its fixture at {line}");
    }
}

fn retrieved() -> RetrievalResult {
    let entry = |id: &str, layer: &str, text: &str, scene: Option<u32>| {
        json!({
            "entry": {
                "id": id, "layer": layer, "text": text,
                "semantic_embedding": [1.0, 0.0], "affect_embedding": [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                "created_at_scene": scene
            },
            "score": 0.5
        })
    };
    serde_json::from_value(json!({
        "entries": [
            entry("sim-0001", "simulation", "You apologised after the argument about rent.", Some(1)),
            entry("id-002", "identity", "You value honesty.", None),
        ]
    }))
    .unwrap()
}

fn options() -> OptionSet {
    let o = |id: &str, d: &str| ActionOption {
        id: id.into(),
        description: d.into(),
        actor: Partner::A,
    };
    OptionSet {
        options: vec![
            o("o1", "Suggest splitting the chores by week"),
            o("o2", "Leave the dishes and go for a walk"),
            o("o3", "Ask your partner what would feel fair"),
        ],
        acting_partner: Partner::A,
    }
}

#[test]
fn decision_prompt_matches_fixture() {
    let text = assemble_decision_prompt(
        &common::persona("A"),
        "You both came home late. The sink is full.",
        &retrieved(),
        "I am tired of always being the one who notices.",
        &options(),
    )
    .render();

    // The template's fixed wording, written out independently of the
    // crate's constants.
    for line in [
        "You are currently in a romantic relationship and facing a decision.",
        "- Carefully review the list of candidate actions. Do not invent or modify options---choose only from those provided.",
        "- Select the action that best fits the character's personality traits, current motivations, and the central conflict of the scene.",
        "- Consider the character's recent history and prior events. Ensure your choice maintains narrative continuity and does not contradict what has already happened.",
        "- Do not include dialogue, internal monologue, or describe future actions by other characters. Focus on a concrete, external action that can be enacted in the next scene.",
        "Selection criteria (use qualitative judgment, not numeric scoring):",
        "- Relevance to the current scene conflict",
        "- Consistency with the character's personality, goals, and constraints",
        "- Likelihood to cause a meaningful state change (e.g., in trust, closeness, autonomy, conflict intensity, commitment, resources, or reputation)",
        "- Plausibility and reversibility within the story context",
    ] {
        assert!(text.lines().any(|l| l == line), "missing line: {line}");
    }
    // Context inputs appear in this order, each followed by its value.
    let labels = [
        (
            "Most Recent Internal Thought:",
            "I am tired of always being the one who notices.",
        ),
        ("Your Persona:", "You are partner A. You value honesty."),
        (
            "Scene History:",
            "You both came home late. The sink is full.",
        ),
        (
            "Relevant Memories:",
            "You apologised after the argument about rent.",
        ),
        ("Action Options:", "Suggest splitting the chores by week"),
    ];
    let mut last = 0;
    for (label, value) in labels {
        let at = text[last..]
            .find(&format!("\n{label}\n"))
            .unwrap_or_else(|| panic!("{label} out of order"))
            + last;
        assert!(text[at..].contains(value), "{label} lacks its value");
        last = at + 1;
    }
    check_golden("decision_prompt.txt", &text);
}

async fn mock_run() -> SimulationTrace {
    let gw = build_gateway(BackendKind::Mock, 3).unwrap();
    let config = SimulationConfig {
        num_scenes: 3,
        ..SimulationConfig::default()
    };
    run_simulation(
        &gw,
        &generate_bank(2, 3),
        &common::dyad("g1"),
        &config,
        17,
        &RunOptions::default(),
    )
    .await
}

#[tokio::test]
async fn three_scene_mock_run_matches_fixture() {
    let trace = mock_run().await;
    assert!(trace.error.is_none(), "{:?}", trace.error);
    let text = trace.to_canonical();
    assert_eq!(SimulationTrace::from_canonical(&text).unwrap(), trace);
    check_golden("golden_run.jsonl", &text);
}

#[tokio::test]
async fn end_state_prompts_match_fixtures() {
    let trace = mock_run().await;
    let sim = simulation_aware_prompt(&trace, None).render();
    for scene in &trace.scenes {
        assert!(sim.contains(&scene.rolling_summary));
    }
    check_golden("end_state_simulation_prompt.txt", &sim);
    let only = personas_only_prompt(&trace.partner_a, &trace.partner_b, None).render();
    check_golden("end_state_personas_only_prompt.txt", &only);
}
