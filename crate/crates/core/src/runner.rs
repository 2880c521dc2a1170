//! Batch orchestration and trace persistence.
//!
//! Layout under the output directory:
//!
//! ```text
//! <out>/<dyad_id>/run-<i>.jsonl                 canonical trace
//! <out>/<dyad_id>/checkpoints/run-<i>/scene-<k>.json
//! ```
//!
//! A run whose trace file already holds a complete trace is skipped, and an
//! interrupted run resumes from its latest scene checkpoint, so re-invoking
//! a batch on the same directory finishes the remaining work only.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use crate::domain::{Persona, SimulationTrace};
use crate::gateway::{Gateway, GatewayConfig, HttpBackend, HttpConfig, SyntheticBackend};
use crate::prompts::role;
use crate::scene::{run_simulation, Dyad, RunOptions, ScenarioBank, SimulationConfig};
use crate::util::derive_seed;

/// Embedding width used by the offline backend.
pub const MOCK_EMBEDDING_DIMENSION: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Mock,
    Http,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mock" => Ok(BackendKind::Mock),
            "http" => Ok(BackendKind::Http),
            other => Err(format!("unknown backend {other:?} (expected mock or http)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub runs_per_dyad: u32,
    pub concurrency: usize,
    pub simulation: SimulationConfig,
    pub backend: BackendKind,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn new(output_dir: impl Into<PathBuf>, seed: u64) -> Self {
        Self {
            runs_per_dyad: 5,
            concurrency: 16,
            simulation: SimulationConfig::default(),
            backend: BackendKind::Mock,
            seed,
            output_dir: output_dir.into(),
        }
    }

    fn check(&self) -> Result<(), RunnerError> {
        if self.runs_per_dyad == 0 {
            return Err(RunnerError::Config(
                "runs_per_dyad must be at least 1".into(),
            ));
        }
        if self.concurrency == 0 {
            return Err(RunnerError::Config("concurrency must be at least 1".into()));
        }
        if self.simulation.num_scenes == 0 || self.simulation.k == 0 {
            return Err(RunnerError::Config(
                "num_scenes and k must be at least 1".into(),
            ));
        }
        if !(self.simulation.lambda.is_finite() && self.simulation.lambda >= 0.0) {
            return Err(RunnerError::Config(
                "lambda must be a non-negative number".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("scenario bank is empty")]
    EmptyBank,
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> RunnerError {
    RunnerError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Gateway for the chosen backend. The mock backend is seeded so identical
/// configurations reproduce identical traces.
pub fn build_gateway(kind: BackendKind, seed: u64) -> Result<Gateway, RunnerError> {
    let config = GatewayConfig::default();
    match kind {
        BackendKind::Mock => Ok(Gateway::new(
            Arc::new(SyntheticBackend::new(MOCK_EMBEDDING_DIMENSION, seed)),
            config,
        )),
        BackendKind::Http => {
            let (model, dim) = embedding_model(|k| std::env::var(k).ok())?;
            let http = HttpConfig::from_env(&model, dim).map_err(RunnerError::Config)?;
            let backend = HttpBackend::new(http).map_err(|e| RunnerError::Config(e.to_string()))?;
            Ok(Gateway::new(
                Arc::new(backend),
                http_models(config, |k| std::env::var(k).ok()),
            ))
        }
    }
}

pub const ENV_EMBEDDING_MODEL: &str = "RELATE_EMBEDDING_MODEL";
pub const ENV_EMBEDDING_DIM: &str = "RELATE_EMBEDDING_DIM";
pub const DEFAULT_EMBEDDING_MODEL: &str = "text-embedding-3-small";
pub const DEFAULT_EMBEDDING_DIM: usize = 1536;

/// Embedding model name and vector width, overridable from the environment.
fn embedding_model(env: impl Fn(&str) -> Option<String>) -> Result<(String, usize), RunnerError> {
    let model = env(ENV_EMBEDDING_MODEL).unwrap_or_else(|| DEFAULT_EMBEDDING_MODEL.to_string());
    let dim = match env(ENV_EMBEDDING_DIM) {
        None => DEFAULT_EMBEDDING_DIM,
        Some(v) => match v.trim().parse::<usize>() {
            Ok(d) if d > 0 => d,
            _ => {
                return Err(RunnerError::Config(format!(
                    "{ENV_EMBEDDING_DIM} must be a positive integer, got {v:?}"
                )))
            }
        },
    };
    Ok((model, dim))
}

pub const ENV_CHAT_MODEL: &str = "RELATE_CHAT_MODEL";
pub const ENV_PERSONA_MODEL: &str = "RELATE_PERSONA_MODEL";
pub const DEFAULT_CHAT_MODEL: &str = "qwen3-32b";
pub const DEFAULT_PERSONA_MODEL: &str = "gpt-oss-120b";

/// Model names for the HTTP backend: one model for the simulation and
/// evaluation, a larger one for the two persona-synthesis roles.
fn http_models(mut config: GatewayConfig, env: impl Fn(&str) -> Option<String>) -> GatewayConfig {
    let pick = |key: &str, default: &str| {
        env(key)
            .filter(|m| !m.trim().is_empty())
            .unwrap_or_else(|| default.to_string())
    };
    config.default_model = pick(ENV_CHAT_MODEL, DEFAULT_CHAT_MODEL);
    let persona = pick(ENV_PERSONA_MODEL, DEFAULT_PERSONA_MODEL);
    for role in [role::INSTRUMENT_SUMMARY, role::PERSONA_FUSION] {
        config
            .model_overrides
            .insert(role.to_string(), persona.clone());
    }
    config
}

/// Stable per-run seed from `(seed, dyad_id, run_index)`.
pub fn run_seed(seed: u64, dyad_id: &str, run_index: u32) -> u64 {
    derive_seed(&[
        b"run",
        &seed.to_le_bytes(),
        dyad_id.as_bytes(),
        &run_index.to_le_bytes(),
    ])
}

pub fn trace_path(out: &Path, dyad_id: &str, run_index: u32) -> PathBuf {
    out.join(dyad_id).join(format!("run-{run_index}.jsonl"))
}

pub fn checkpoint_dir(out: &Path, dyad_id: &str, run_index: u32) -> PathBuf {
    out.join(dyad_id)
        .join("checkpoints")
        .join(format!("run-{run_index}"))
}

fn write_atomic(path: &Path, text: &str) -> Result<(), RunnerError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let tmp = path.with_extension("jsonl.tmp");
    std::fs::write(&tmp, text).map_err(|e| io_err(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

pub fn read_trace(path: &Path) -> Result<SimulationTrace, RunnerError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    SimulationTrace::from_canonical(&text).map_err(|e| RunnerError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Every `run-*.jsonl` under `dir/<dyad>/`, grouped by dyad and ordered by
/// run index.
pub fn load_traces(dir: &Path) -> Result<BTreeMap<String, Vec<SimulationTrace>>, RunnerError> {
    let mut out: BTreeMap<String, Vec<SimulationTrace>> = BTreeMap::new();
    let entries = std::fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    for dyad_dir in entries.flatten().map(|e| e.path()).filter(|p| p.is_dir()) {
        let files = std::fs::read_dir(&dyad_dir).map_err(|e| io_err(&dyad_dir, e))?;
        for f in files.flatten().map(|e| e.path()) {
            let name = f.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            if name.starts_with("run-") && name.ends_with(".jsonl") {
                let t = read_trace(&f)?;
                out.entry(t.dyad_id.clone()).or_default().push(t);
            }
        }
    }
    for traces in out.values_mut() {
        traces.sort_by_key(|t| t.run_index);
    }
    Ok(out)
}

/// Dyads file: one `{dyad_id, partner_a, partner_b}` object per line.
pub fn read_dyads(path: &Path) -> Result<Vec<Dyad>, RunnerError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| RunnerError::Format {
                path: path.to_path_buf(),
                message: format!("line {}: {e}", i + 1),
            })
        })
        .collect()
}

pub fn write_dyads(path: &Path, dyads: &[Dyad]) -> Result<(), RunnerError> {
    let text: String = dyads
        .iter()
        .map(|d| serde_json::to_string(d).expect("dyads serialize") + "\n")
        .collect();
    write_atomic(path, &text)
}

/// Pairs personas keyed `<dyad>-a` / `<dyad>-b` into dyads, in id order.
/// Returns the dyads and the subject ids that had no partner.
pub fn pair_subjects(personas: &BTreeMap<String, Persona>) -> (Vec<Dyad>, Vec<String>) {
    let mut dyads = Vec::new();
    let mut unpaired = Vec::new();
    for (id, a) in personas {
        if let Some(dyad_id) = id.strip_suffix("-a") {
            match personas.get(&format!("{dyad_id}-b")) {
                Some(b) => dyads.push(Dyad {
                    dyad_id: dyad_id.to_string(),
                    partner_a: a.clone(),
                    partner_b: b.clone(),
                }),
                None => unpaired.push(id.clone()),
            }
        } else if !id
            .strip_suffix("-b")
            .is_some_and(|d| personas.contains_key(&format!("{d}-a")))
        {
            unpaired.push(id.clone());
        }
    }
    (dyads, unpaired)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunFailure {
    pub dyad_id: String,
    pub run_index: u32,
    pub error: String,
}

#[derive(Debug, Default)]
pub struct BatchResult {
    /// Ordered by dyad (input order), then run index.
    pub traces: Vec<SimulationTrace>,
    pub failures: Vec<RunFailure>,
    /// Runs skipped because a complete trace already existed.
    pub reused: usize,
    /// Highest number of runs in flight at once.
    pub peak_in_flight: usize,
}

/// Executes `runs_per_dyad` runs per dyad with at most `concurrency` in
/// flight. Run failures are recorded in their traces and in `failures`;
/// only configuration and bank problems fail the batch.
pub async fn run_batch(
    gateway: &Gateway,
    bank: Arc<ScenarioBank>,
    dyads: &[Dyad],
    config: &RunConfig,
) -> Result<BatchResult, RunnerError> {
    config.check()?;
    if bank.is_empty() {
        return Err(RunnerError::EmptyBank);
    }
    let limiter = Arc::new(Semaphore::new(config.concurrency));
    let in_flight = Arc::new(AtomicUsize::new(0));
    let peak = Arc::new(AtomicUsize::new(0));
    let mut set = tokio::task::JoinSet::new();
    let mut reused = Vec::new();

    for (order, dyad) in dyads.iter().enumerate() {
        for run_index in 0..config.runs_per_dyad {
            let path = trace_path(&config.output_dir, &dyad.dyad_id, run_index);
            if let Ok(t) = read_trace(&path) {
                if t.error.is_none()
                    && t.run_seed == run_seed(config.seed, &dyad.dyad_id, run_index)
                {
                    reused.push((order, t));
                    continue;
                }
            }
            let (gw, bank, dyad) = (gateway.clone(), bank.clone(), Arc::new(dyad.clone()));
            let (limiter, in_flight, peak) = (limiter.clone(), in_flight.clone(), peak.clone());
            let sim = config.simulation.clone();
            let seed = run_seed(config.seed, &dyad.dyad_id, run_index);
            let options = RunOptions {
                run_index,
                hook: None,
                checkpoint_dir: Some(checkpoint_dir(&config.output_dir, &dyad.dyad_id, run_index)),
            };
            set.spawn(async move {
                let _permit = limiter
                    .acquire_owned()
                    .await
                    .expect("limiter is never closed");
                let now = in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                peak.fetch_max(now, Ordering::SeqCst);
                let trace = run_simulation(&gw, &bank, &dyad, &sim, seed, &options).await;
                let written = write_atomic(&path, &trace.to_canonical());
                in_flight.fetch_sub(1, Ordering::SeqCst);
                (order, trace, written)
            });
        }
    }

    let mut result = BatchResult {
        reused: reused.len(),
        ..Default::default()
    };
    let mut done: Vec<(usize, SimulationTrace)> = reused;
    while let Some(joined) = set.join_next().await {
        let (order, trace, written) = joined.expect("run task panicked");
        if let Err(e) = written {
            tracing::error!(dyad = %trace.dyad_id, run = trace.run_index, error = %e, "could not write trace");
            result.failures.push(RunFailure {
                dyad_id: trace.dyad_id.clone(),
                run_index: trace.run_index,
                error: e.to_string(),
            });
        }
        if let Some(e) = &trace.error {
            result.failures.push(RunFailure {
                dyad_id: trace.dyad_id.clone(),
                run_index: trace.run_index,
                error: e.clone(),
            });
        }
        done.push((order, trace));
    }
    done.sort_by_key(|(order, t)| (*order, t.run_index));
    result
        .failures
        .sort_by(|a, b| (&a.dyad_id, a.run_index).cmp(&(&b.dyad_id, b.run_index)));
    result.traces = done.into_iter().map(|(_, t)| t).collect();
    result.peak_in_flight = peak.load(Ordering::SeqCst);
    Ok(result)
}
