//! RELATE-Sim: a turning-point simulation engine for romantic relationships.
//!
//! Two persona-conditioned agents move through a sequence of turning-point
//! scenes framed by a central scene master. Each scene yields an
//! interpretable relationship state and a commitment estimate; batches of
//! runs feed end-state prediction and cohort statistics.
//!
//! Module map:
//!
//! - [`domain`]: shared value types, canonical traces, trace validation
//! - [`gateway`]: model access (HTTP, scripted, synthetic backends)
//! - [`persona`]: instrument summaries, persona fusion, synthetic couples
//! - [`memory`]: layered memory with hybrid semantic/affective retrieval
//! - [`agent`]: per-partner appraisal and option choice
//! - [`scene`]: turning-point selection, narration, state and commitment
//! - [`eval`]: outcome mapping, prediction and statistics
//! - [`runner`]: batch orchestration and persistence
//! - [`server`]: HTTP session service for rehearsal

pub mod agent;
pub mod domain;
pub mod eval;
pub mod gateway;
pub mod memory;
pub mod persona;
pub mod prompts;
pub mod runner;
pub mod scene;
pub mod server;
pub mod util;
