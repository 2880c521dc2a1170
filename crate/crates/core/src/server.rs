//! HTTP session service for human-in-the-loop rehearsal.
//!
//! Each session runs one simulation on a background task. When the acting
//! partner is the human-controlled one, the loop parks at the decision
//! point until `POST /v1/sessions/{id}/choice` arrives; the agent's own pick
//! for that point is kept as the shadow choice.
//!
//! | method | path | success |
//! |---|---|---|
//! | POST | `/v1/sessions` | 201 `{session_id}` |
//! | GET | `/v1/sessions/{id}/state` | 200 state snapshot |
//! | POST | `/v1/sessions/{id}/choice` | 200 `{accepted, agent_shadow_choice}` |
//! | GET | `/v1/sessions/{id}/report` | 200 alignment report |
//! | GET | `/v1/healthz` | 200 |

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::oneshot;

use crate::domain::{OptionSet, Partner, RelationshipState, SceneRecord, SimulationTrace};
use crate::gateway::Gateway;
use crate::scene::{
    run_simulation, DecisionHook, DecisionPoint, Dyad, ExpandedScene, HumanChoice, RunOptions,
    ScenarioBank, SimulationConfig,
};
use crate::util::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanDecision {
    pub scene: u32,
    pub option_id: String,
    pub rationale: String,
    pub agent_shadow_choice: String,
    /// Options in the order shown.
    pub options: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRecord {
    pub scene: u32,
    pub human_choice: String,
    pub agent_shadow_choice: String,
    pub matched: bool,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub choice_alignment: f64,
    pub decisions: Vec<AlignmentRecord>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("no completed decisions yet")]
pub struct NoDecisions;

/// Fraction of decision points where the human and the shadow agent agreed.
pub fn alignment_report(choices: &[HumanDecision]) -> Result<AlignmentReport, NoDecisions> {
    if choices.is_empty() {
        return Err(NoDecisions);
    }
    let decisions: Vec<AlignmentRecord> = choices
        .iter()
        .map(|c| AlignmentRecord {
            scene: c.scene,
            human_choice: c.option_id.clone(),
            agent_shadow_choice: c.agent_shadow_choice.clone(),
            matched: c.option_id == c.agent_shadow_choice,
            rationale: c.rationale.clone(),
        })
        .collect();
    let matched = decisions.iter().filter(|d| d.matched).count();
    Ok(AlignmentReport {
        choice_alignment: matched as f64 / decisions.len() as f64,
        decisions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Running,
    AwaitingChoice,
    Completed,
    Failed,
}

struct Pending {
    scene: u32,
    options: OptionSet,
    shadow: String,
    reply: oneshot::Sender<HumanChoice>,
}

#[derive(Default)]
struct SessionInner {
    scene_index: u32,
    scene: Option<ExpandedScene>,
    narration: Vec<String>,
    pending: Option<Pending>,
    state: RelationshipState,
    markers: Vec<String>,
    human_choices: Vec<HumanDecision>,
    agent_shadow_choices: Vec<String>,
    trace: Option<SimulationTrace>,
}

/// One live rehearsal.
pub struct Session {
    pub session_id: String,
    pub dyad: Dyad,
    pub human_controls: Option<Partner>,
    inner: Mutex<SessionInner>,
}

impl Session {
    fn lock(&self) -> std::sync::MutexGuard<'_, SessionInner> {
        self.inner.lock().expect("session lock poisoned")
    }

    pub fn status(&self) -> SessionStatus {
        let inner = self.lock();
        match (&inner.trace, &inner.pending) {
            (Some(t), _) if t.error.is_some() => SessionStatus::Failed,
            (Some(_), _) => SessionStatus::Completed,
            (None, Some(_)) => SessionStatus::AwaitingChoice,
            (None, None) => SessionStatus::Running,
        }
    }

    pub fn human_choices(&self) -> Vec<HumanDecision> {
        self.lock().human_choices.clone()
    }

    pub fn trace(&self) -> Option<SimulationTrace> {
        self.lock().trace.clone()
    }

    pub fn snapshot(&self) -> serde_json::Value {
        let status = self.status();
        let inner = self.lock();
        json!({
            "session_id": self.session_id,
            "status": status,
            "human_controls": self.human_controls,
            "scene_index": inner.scene_index,
            "scene": inner.scene.as_ref().map(|s| json!({
                "category": s.category,
                "scene_state": s.scene_state,
                "stakes": s.stakes,
                "third_party": s.third_party,
            })),
            "narration": inner.narration,
            "pending": inner.pending.as_ref().map(|p| &p.options),
            "relationship_state": inner.state,
            "markers": inner.markers,
            "error": inner.trace.as_ref().and_then(|t| t.error.clone()),
        })
    }

    /// Validates and delivers a human choice to the parked loop.
    pub fn submit(&self, option_id: &str, rationale: &str) -> Result<String, ChoiceError> {
        let mut inner = self.lock();
        let Some(pending) = inner.pending.as_ref() else {
            return Err(ChoiceError::NothingPending);
        };
        if pending.options.get(option_id).is_none() {
            return Err(ChoiceError::Invalid(format!(
                "option_id {option_id:?} is not one of {}",
                pending.options.ids().join(", ")
            )));
        }
        if rationale.trim().is_empty() {
            return Err(ChoiceError::Invalid("rationale must not be empty".into()));
        }
        let p = inner.pending.take().expect("checked above");
        let record = HumanDecision {
            scene: p.scene,
            option_id: option_id.to_string(),
            rationale: rationale.trim().to_string(),
            agent_shadow_choice: p.shadow.clone(),
            options: p.options.ids().into_iter().map(str::to_string).collect(),
        };
        inner.human_choices.push(record);
        inner.agent_shadow_choices.push(p.shadow.clone());
        let _ = p.reply.send(HumanChoice {
            option_id: option_id.to_string(),
            rationale: rationale.trim().to_string(),
        });
        Ok(p.shadow)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ChoiceError {
    #[error("no decision is pending")]
    NothingPending,
    #[error("{0}")]
    Invalid(String),
}

struct SessionHook(Arc<Session>);

#[async_trait]
impl DecisionHook for SessionHook {
    fn controls(&self, partner: Partner) -> bool {
        self.0.human_controls == Some(partner)
    }

    async fn choose(&self, point: DecisionPoint) -> Result<HumanChoice, String> {
        let (tx, rx) = oneshot::channel();
        self.0.lock().pending = Some(Pending {
            scene: point.scene_index,
            options: point.options,
            shadow: point.shadow_option_id,
            reply: tx,
        });
        rx.await
            .map_err(|_| "session closed while waiting for a choice".to_string())
    }

    fn observe(&self, _scene_index: u32, line: &str) {
        self.0.lock().narration.push(line.to_string());
    }

    fn scene_started(&self, scene_index: u32, scene: &ExpandedScene) {
        let mut inner = self.0.lock();
        inner.scene_index = scene_index;
        inner.scene = Some(scene.clone());
        inner.narration.clear();
    }

    fn scene_finished(&self, record: &SceneRecord, previous: &RelationshipState) {
        let mut inner = self.0.lock();
        inner.markers = record.inferred_state.change_markers(previous);
        inner.state = record.inferred_state;
    }
}

/// Shared server state.
pub struct AppState {
    pub gateway: Gateway,
    pub bank: Arc<ScenarioBank>,
    pub simulation: SimulationConfig,
    pub seed: u64,
    sessions: Mutex<HashMap<String, Arc<Session>>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(
        gateway: Gateway,
        bank: Arc<ScenarioBank>,
        simulation: SimulationConfig,
        seed: u64,
    ) -> Self {
        Self {
            gateway,
            bank,
            simulation,
            seed,
            sessions: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        }
    }

    pub fn session(&self, id: &str) -> Option<Arc<Session>> {
        self.sessions
            .lock()
            .expect("sessions lock poisoned")
            .get(id)
            .cloned()
    }

    /// Registers a session and starts its simulation task.
    pub fn start_session(
        self: &Arc<Self>,
        dyad: Dyad,
        human_controls: Option<Partner>,
        num_scenes: Option<u32>,
    ) -> Arc<Session> {
        let n = self.next_id.fetch_add(1, Ordering::SeqCst);
        let session = Arc::new(Session {
            session_id: format!("sess-{n:06}"),
            dyad,
            human_controls,
            inner: Mutex::new(SessionInner::default()),
        });
        self.sessions
            .lock()
            .expect("sessions lock poisoned")
            .insert(session.session_id.clone(), session.clone());
        let mut config = self.simulation.clone();
        if let Some(n) = num_scenes {
            config.num_scenes = n;
        }
        let seed = derive_seed(&[
            b"session",
            &self.seed.to_le_bytes(),
            session.dyad.dyad_id.as_bytes(),
            &n.to_le_bytes(),
        ]);
        let (app, s) = (self.clone(), session.clone());
        tokio::spawn(async move {
            let options = RunOptions {
                run_index: 0,
                hook: Some(Arc::new(SessionHook(s.clone()))),
                checkpoint_dir: None,
            };
            let trace =
                run_simulation(&app.gateway, &app.bank, &s.dyad, &config, seed, &options).await;
            s.lock().trace = Some(trace);
        });
        session
    }
}

#[derive(Debug, Deserialize)]
pub struct CreateSession {
    pub dyad: Dyad,
    #[serde(default)]
    pub human_controls: Option<String>,
    #[serde(default)]
    pub num_scenes: Option<u32>,
}

#[derive(Debug, Deserialize)]
pub struct ChoiceBody {
    pub option_id: String,
    #[serde(default)]
    pub rationale: String,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn not_found(id: &str) -> Response {
    error(StatusCode::NOT_FOUND, format!("session {id} not found"))
}

async fn create_session(
    State(app): State<Arc<AppState>>,
    Json(body): Json<CreateSession>,
) -> Response {
    let controls = match body.human_controls.as_deref().map(str::trim) {
        None | Some("") | Some("none") => None,
        Some(p) => match p.parse::<Partner>() {
            Ok(p) => Some(p),
            Err(_) => {
                return error(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    format!("human_controls must be A, B or none, got {p:?}"),
                )
            }
        },
    };
    if body.num_scenes == Some(0) {
        return error(
            StatusCode::UNPROCESSABLE_ENTITY,
            "num_scenes must be at least 1",
        );
    }
    let s = app.start_session(body.dyad, controls, body.num_scenes);
    (
        StatusCode::CREATED,
        Json(json!({ "session_id": s.session_id })),
    )
        .into_response()
}

async fn session_state(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    match app.session(&id) {
        Some(s) => Json(s.snapshot()).into_response(),
        None => not_found(&id),
    }
}

async fn submit_choice(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(body): Json<ChoiceBody>,
) -> Response {
    let Some(s) = app.session(&id) else {
        return not_found(&id);
    };
    match s.submit(&body.option_id, &body.rationale) {
        Ok(shadow) => {
            Json(json!({ "accepted": true, "agent_shadow_choice": shadow })).into_response()
        }
        Err(e @ ChoiceError::NothingPending) => error(StatusCode::CONFLICT, e.to_string()),
        Err(e @ ChoiceError::Invalid(_)) => error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
    }
}

async fn session_report(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let Some(s) = app.session(&id) else {
        return not_found(&id);
    };
    match alignment_report(&s.human_choices()) {
        Ok(r) => Json(r).into_response(),
        Err(e) => error(StatusCode::CONFLICT, e.to_string()),
    }
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/healthz", get(healthz))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}/state", get(session_state))
        .route("/v1/sessions/{id}/choice", post(submit_choice))
        .route("/v1/sessions/{id}/report", get(session_report))
        .with_state(state)
}

/// Serves the session API until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}
