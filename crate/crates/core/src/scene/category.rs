//! Next-turning-point heuristic and candidate sampling.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::bank::{Scenario, ScenarioBank};
use crate::domain::{
    Alternatives, BreakupMarker, Clarity, Conflict, Constraints, Network, RelationshipState,
    Transition, TurningPointCategory,
};

/// Candidates sampled per scene.
pub const CANDIDATE_POOL: usize = 30;

/// Ordered candidate categories for the next scene; the first is primary.
///
/// Rules, first match wins the primary slot:
///
/// | condition | category |
/// |---|---|
/// | state all unknown at scene 0 (cold start) | InitialFormation |
/// | conflict ∈ {active, unresolved} | ConflictAndRepair |
/// | breakup_marker = soft or alternatives ∈ {salient, hot} | ChallengesOrTests |
/// | transition ∈ {upcoming, underway} | ChallengesOrTests |
/// | clarity = unclear and scene index < 2 | InitialFormation |
/// | constraints = accrued and clarity = explicit | DeepeningOrMilestones |
/// | network ∈ {opposed, mixed} | OtherModernTurningPoints |
/// | otherwise | RelationshipDevelopment |
///
/// Every other rule that fires follows in table order, then the remaining
/// categories in declaration order (used as sampling fallbacks).
pub fn select_category(state: &RelationshipState, scene_index: usize) -> Vec<TurningPointCategory> {
    use TurningPointCategory::*;
    let rules = [
        (state.is_all_unknown() && scene_index == 0, InitialFormation),
        (
            matches!(state.conflict, Conflict::Active | Conflict::Unresolved),
            ConflictAndRepair,
        ),
        (
            state.breakup_marker == BreakupMarker::Soft
                || matches!(
                    state.alternatives,
                    Alternatives::Salient | Alternatives::Hot
                ),
            ChallengesOrTests,
        ),
        (
            matches!(
                state.transition,
                Transition::Upcoming | Transition::Underway
            ),
            ChallengesOrTests,
        ),
        (
            state.clarity == Clarity::Unclear && scene_index < 2,
            InitialFormation,
        ),
        (
            state.constraints == Constraints::Accrued && state.clarity == Clarity::Explicit,
            DeepeningOrMilestones,
        ),
        (
            matches!(state.network, Network::Opposed | Network::Mixed),
            OtherModernTurningPoints,
        ),
        (true, RelationshipDevelopment),
    ];
    let mut out: Vec<TurningPointCategory> = Vec::with_capacity(6);
    for (fires, cat) in rules {
        if fires && !out.contains(&cat) {
            out.push(cat);
        }
    }
    for &c in TurningPointCategory::ALL {
        if !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("no scenarios in any candidate category")]
pub struct EmptyBank;

/// Uniform sample without replacement of up to `n` scenarios from the first
/// non-empty category in `priority`.
pub fn sample_candidates<'b>(
    bank: &'b ScenarioBank,
    priority: &[TurningPointCategory],
    n: usize,
    seed: u64,
) -> Result<(TurningPointCategory, Vec<&'b Scenario>), EmptyBank> {
    for &category in priority {
        let pool = bank.pool(category);
        if pool.is_empty() {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picked: Vec<&Scenario> = pool
            .choose_multiple(&mut rng, n.min(pool.len()))
            .copied()
            .collect();
        return Ok((category, picked));
    }
    Err(EmptyBank)
}
