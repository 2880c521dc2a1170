//! Session API over real HTTP with a scripted backend.

mod common;

use std::sync::Arc;
use std::time::Duration;

use reqwest::StatusCode;
use serde_json::{json, Value};

use relate_sim::gateway::{Gateway, GatewayConfig, ScriptedBackend};
use relate_sim::scene::SimulationConfig;
use relate_sim::server::{serve, AppState};

async fn start() -> String {
    let gw = Gateway::new(
        Arc::new(ScriptedBackend::new(common::loop_rules(), 8)),
        GatewayConfig::default(),
    );
    let state = Arc::new(AppState::new(
        gw,
        Arc::new(common::one_per_category()),
        SimulationConfig::default(),
        1,
    ));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { serve(listener, state).await.unwrap() });
    format!("http://{addr}/v1")
}

async fn create(base: &str, controls: &str, scenes: u32) -> reqwest::Response {
    reqwest::Client::new()
        .post(format!("{base}/sessions"))
        .json(&json!({ "dyad": common::dyad("d1"), "human_controls": controls, "num_scenes": scenes }))
        .send()
        .await
        .unwrap()
}

async fn get(url: String) -> (StatusCode, Value) {
    let r = reqwest::get(url).await.unwrap();
    let status = r.status();
    (status, r.json().await.unwrap())
}

async fn choose(base: &str, id: &str, option: &str, rationale: &str) -> (StatusCode, Value) {
    let r = reqwest::Client::new()
        .post(format!("{base}/sessions/{id}/choice"))
        .json(&json!({ "option_id": option, "rationale": rationale }))
        .send()
        .await
        .unwrap();
    let status = r.status();
    (status, r.json().await.unwrap())
}

/// Polls the state endpoint until `done` holds.
async fn wait_for(base: &str, id: &str, done: impl Fn(&Value) -> bool) -> Value {
    for _ in 0..500 {
        let (status, body) = get(format!("{base}/sessions/{id}/state")).await;
        assert_eq!(status, StatusCode::OK);
        if done(&body) {
            return body;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    panic!("session {id} never reached the expected state");
}

#[tokio::test]
async fn healthz_and_unknown_sessions() {
    let base = start().await;
    let (status, body) = get(format!("{base}/healthz")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    let (status, _) = get(format!("{base}/sessions/sess-999999/state")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = get(format!("{base}/sessions/sess-999999/report")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = choose(&base, "sess-999999", "o1", "why").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn create_validates_input() {
    let base = start().await;
    assert_eq!(
        create(&base, "C", 1).await.status(),
        StatusCode::UNPROCESSABLE_ENTITY
    );
    assert_eq!(
        create(&base, "A", 0).await.status(),
        StatusCode::UNPROCESSABLE_ENTITY
    );
    let r = create(&base, "B", 1).await;
    assert_eq!(r.status(), StatusCode::CREATED);
    let body: Value = r.json().await.unwrap();
    assert!(body["session_id"].as_str().unwrap().starts_with("sess-"));
}

#[tokio::test]
async fn scripted_session_reports_zero_alignment() {
    let base = start().await;
    let r = create(&base, "A", 1).await;
    assert_eq!(r.status(), StatusCode::CREATED);
    let id = r.json::<Value>().await.unwrap()["session_id"]
        .as_str()
        .unwrap()
        .to_string();

    let (status, _) = get(format!("{base}/sessions/{id}/report")).await;
    assert_eq!(status, StatusCode::CONFLICT, "no decisions yet");

    let state = wait_for(&base, &id, |s| !s["pending"].is_null()).await;
    assert_eq!(state["status"], "awaiting_choice");
    let ids: Vec<&str> = state["pending"]["options"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["id"].as_str().unwrap())
        .collect();
    assert_eq!(ids, ["o1", "o2", "o3"]);
    assert_eq!(state["pending"]["acting_partner"], "A");
    assert!(state["narration"]
        .as_array()
        .unwrap()
        .iter()
        .any(|l| l.as_str().unwrap().contains("They sit down.")));
    assert_eq!(state["scene"]["scene_state"]["scene_conflict"], "who cooks");

    let (status, _) = choose(&base, &id, "o9", "because").await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = choose(&base, &id, "o1", "   ").await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, body) = choose(&base, &id, "o1", "I would ask what they want first.").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        body,
        json!({ "accepted": true, "agent_shadow_choice": "o2" })
    );
    let (status, _) = choose(&base, &id, "o1", "again").await;
    assert_eq!(status, StatusCode::CONFLICT);

    let done = wait_for(&base, &id, |s| s["status"] == "completed").await;
    assert!(done["error"].is_null());
    assert_eq!(done["relationship_state"]["clarity"], "tacit");

    let (status, report) = get(format!("{base}/sessions/{id}/report")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report["choice_alignment"], 0.0);
    let decisions = report["decisions"].as_array().unwrap();
    assert_eq!(decisions.len(), 1);
    assert_eq!(decisions[0]["human_choice"], "o1");
    assert_eq!(decisions[0]["matched"], false);
    assert_eq!(decisions[0]["agent_shadow_choice"], "o2");
}

#[tokio::test]
async fn autonomous_sessions_run_to_completion() {
    let base = start().await;
    let id = create(&base, "none", 2)
        .await
        .json::<Value>()
        .await
        .unwrap()["session_id"]
        .as_str()
        .unwrap()
        .to_string();
    let done = wait_for(&base, &id, |s| s["status"] == "completed").await;
    assert_eq!(done["scene_index"], 1);
    assert!(done["pending"].is_null());
    let (status, _) = choose(&base, &id, "o1", "late").await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = get(format!("{base}/sessions/{id}/report")).await;
    assert_eq!(status, StatusCode::CONFLICT);
}
