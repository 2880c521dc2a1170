//! Shared value types: the schema for traces, checkpoints and the wire API.

mod affect;
mod state;
pub(crate) mod tokens;
mod trace;
mod types;
mod validate;

pub use affect::{AffectError, AffectVector, AFFECT_DIM, AFFECT_NAMES};
pub use state::{
    Alternatives, BreakupMarker, Clarity, Conflict, Constraints, Network, RelationshipState,
    RepairOutcome, Transition, STATE_FIELDS,
};
pub use tokens::{OutcomeLabel, Partner, TokenError, TurningPointCategory};
pub use trace::{
    event_id, ConfigSnapshot, Controller, Decision, SceneEvent, SceneRecord, SimulationTrace,
    TraceFormatError,
};
pub(crate) use types::normalize_ws;
pub use types::{
    ActionOption, CommitmentEstimate, InstrumentDoc, InstrumentKind, InstrumentSynopsis,
    MemoryEntry, MemoryLayer, OptionSet, Persona, RelationshipMetrics, Reporter, Rule, SceneState,
    COMMITMENT_MAX, COMMITMENT_MIN, MAX_OPTIONS, MIN_OPTIONS,
};
pub use validate::{validate_trace, ValidationReport, Violation};
