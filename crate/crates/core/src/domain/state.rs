//! The eight-field interpretable dyadic state.

use serde::{Deserialize, Serialize};

use super::tokens::token_enum;

token_enum! {
    pub enum Conflict: "conflict" {
        None => "none",
        Brewing => "brewing",
        Active => "active",
        Unresolved => "unresolved",
        Repaired => "repaired",
        Unknown => "unknown",
    }
}

token_enum! {
    pub enum RepairOutcome: "repair_outcome" {
        None => "none",
        Attempted => "attempted",
        Successful => "successful",
        Failed => "failed",
        Unknown => "unknown",
    }
}

token_enum! {
    pub enum Clarity: "clarity" {
        Unclear => "unclear",
        Tacit => "tacit",
        Explicit => "explicit",
        Unknown => "unknown",
    }
}

token_enum! {
    pub enum Constraints: "constraints" {
        None => "none",
        Emerging => "emerging",
        Accrued => "accrued",
        Unknown => "unknown",
    }
}

token_enum! {
    pub enum Alternatives: "alternatives" {
        Quiet => "quiet",
        Salient => "salient",
        Hot => "hot",
        Unknown => "unknown",
    }
}

token_enum! {
    pub enum Transition: "transition" {
        None => "none",
        Upcoming => "upcoming",
        Underway => "underway",
        Unknown => "unknown",
    }
}

token_enum! {
    pub enum Network: "network" {
        Supportive => "supportive",
        Neutral => "neutral",
        Opposed => "opposed",
        Mixed => "mixed",
        Unknown => "unknown",
    }
}

token_enum! {
    pub enum BreakupMarker: "breakup_marker" {
        None => "none",
        Soft => "soft",
        Hard => "hard",
        Unknown => "unknown",
    }
}

/// Names of the eight state fields, in canonical order.
pub const STATE_FIELDS: [&str; 8] = [
    "conflict",
    "repair_outcome",
    "clarity",
    "constraints",
    "alternatives",
    "transition",
    "network",
    "breakup_marker",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationshipState {
    pub conflict: Conflict,
    pub repair_outcome: RepairOutcome,
    pub clarity: Clarity,
    pub constraints: Constraints,
    pub alternatives: Alternatives,
    pub transition: Transition,
    pub network: Network,
    pub breakup_marker: BreakupMarker,
}

impl Default for RelationshipState {
    fn default() -> Self {
        Self {
            conflict: Conflict::Unknown,
            repair_outcome: RepairOutcome::Unknown,
            clarity: Clarity::Unknown,
            constraints: Constraints::Unknown,
            alternatives: Alternatives::Unknown,
            transition: Transition::Unknown,
            network: Network::Unknown,
            breakup_marker: BreakupMarker::Unknown,
        }
    }
}

impl RelationshipState {
    pub fn is_all_unknown(&self) -> bool {
        *self == Self::default()
    }

    /// `(field, token)` pairs in canonical field order.
    pub fn tokens(&self) -> [(&'static str, &'static str); 8] {
        [
            (STATE_FIELDS[0], self.conflict.as_str()),
            (STATE_FIELDS[1], self.repair_outcome.as_str()),
            (STATE_FIELDS[2], self.clarity.as_str()),
            (STATE_FIELDS[3], self.constraints.as_str()),
            (STATE_FIELDS[4], self.alternatives.as_str()),
            (STATE_FIELDS[5], self.transition.as_str()),
            (STATE_FIELDS[6], self.network.as_str()),
            (STATE_FIELDS[7], self.breakup_marker.as_str()),
        ]
    }

    /// Accepted vocabulary for a field name.
    pub fn vocabulary(field: &str) -> Option<Vec<&'static str>> {
        Some(match field {
            "conflict" => Conflict::tokens(),
            "repair_outcome" => RepairOutcome::tokens(),
            "clarity" => Clarity::tokens(),
            "constraints" => Constraints::tokens(),
            "alternatives" => Alternatives::tokens(),
            "transition" => Transition::tokens(),
            "network" => Network::tokens(),
            "breakup_marker" => BreakupMarker::tokens(),
            _ => return None,
        })
    }

    /// Plain-language change markers from `previous` to `self`, e.g.
    /// `"clarity moved tacit → explicit"`. Fields that are unchanged or
    /// that moved to/from `unknown` are skipped.
    pub fn change_markers(&self, previous: &RelationshipState) -> Vec<String> {
        previous
            .tokens()
            .iter()
            .zip(self.tokens().iter())
            .filter(|((_, before), (_, after))| {
                before != after && *before != "unknown" && *after != "unknown"
            })
            .map(|((field, before), (_, after))| {
                format!("{} moved {before} → {after}", field.replace('_', " "))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_all_unknown() {
        let s = RelationshipState::default();
        assert!(s.is_all_unknown());
        assert!(s.tokens().iter().all(|(_, t)| *t == "unknown"));
    }

    #[test]
    fn vocabularies_match_enum_lists() {
        assert_eq!(
            RelationshipState::vocabulary("conflict").unwrap(),
            [
                "none",
                "brewing",
                "active",
                "unresolved",
                "repaired",
                "unknown"
            ]
        );
        assert_eq!(
            RelationshipState::vocabulary("repair_outcome").unwrap(),
            ["none", "attempted", "successful", "failed", "unknown"]
        );
        assert_eq!(
            RelationshipState::vocabulary("clarity").unwrap(),
            ["unclear", "tacit", "explicit", "unknown"]
        );
        assert_eq!(
            RelationshipState::vocabulary("constraints").unwrap(),
            ["none", "emerging", "accrued", "unknown"]
        );
        assert_eq!(
            RelationshipState::vocabulary("alternatives").unwrap(),
            ["quiet", "salient", "hot", "unknown"]
        );
        assert_eq!(
            RelationshipState::vocabulary("transition").unwrap(),
            ["none", "upcoming", "underway", "unknown"]
        );
        assert_eq!(
            RelationshipState::vocabulary("network").unwrap(),
            ["supportive", "neutral", "opposed", "mixed", "unknown"]
        );
        assert_eq!(
            RelationshipState::vocabulary("breakup_marker").unwrap(),
            ["none", "soft", "hard", "unknown"]
        );
        assert!(RelationshipState::vocabulary("mood").is_none());
    }

    #[test]
    fn parse_rejects_foreign_tokens() {
        assert!("simmering".parse::<Conflict>().is_err());
        assert!(serde_json::from_str::<RelationshipState>(
            r#"{"conflict":"simmering","repair_outcome":"none","clarity":"tacit","constraints":"none","alternatives":"quiet","transition":"none","network":"neutral","breakup_marker":"none"}"#
        )
        .is_err());
    }

    #[test]
    fn change_markers_plain_language() {
        let before = RelationshipState {
            clarity: Clarity::Tacit,
            ..Default::default()
        };
        let after = RelationshipState {
            clarity: Clarity::Explicit,
            ..Default::default()
        };
        assert_eq!(
            after.change_markers(&before),
            ["clarity moved tacit → explicit"]
        );
        assert!(after
            .change_markers(&RelationshipState::default())
            .is_empty());
    }
}
