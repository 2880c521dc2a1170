//! Closed string-token enums.
//!
//! Every enum here serializes to one fixed lowercase token and refuses to
//! parse anything else. The [`token_enum!`] macro generates the boilerplate.

/// An enum value could not be parsed from its token.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} token {token:?} (expected one of: {expected})")]
pub struct TokenError {
    pub kind: &'static str,
    pub token: String,
    pub expected: String,
}

macro_rules! token_enum {
    (
        $(#[$meta:meta])*
        $vis:vis enum $name:ident : $kind:literal {
            $( $(#[$vmeta:meta])* $variant:ident => $token:literal ),+ $(,)?
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        $vis enum $name {
            $( $(#[$vmeta])* $variant ),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $token),+
                }
            }

            /// All accepted tokens, in declaration order.
            pub fn tokens() -> Vec<&'static str> {
                Self::ALL.iter().map(|v| v.as_str()).collect()
            }
        }

        impl std::str::FromStr for $name {
            type Err = $crate::domain::tokens::TokenError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($token => Ok($name::$variant),)+
                    other => Err($crate::domain::tokens::TokenError {
                        kind: $kind,
                        token: other.to_string(),
                        expected: Self::tokens().join(", "),
                    }),
                }
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl serde::Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> serde::Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let raw = <std::borrow::Cow<'de, str>>::deserialize(d)?;
                raw.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

pub(crate) use token_enum;

token_enum! {
    /// The six turning-point super-categories.
    pub enum TurningPointCategory: "category" {
        InitialFormation => "InitialFormation",
        RelationshipDevelopment => "RelationshipDevelopment",
        ChallengesOrTests => "ChallengesOrTests",
        ConflictAndRepair => "ConflictAndRepair",
        DeepeningOrMilestones => "DeepeningOrMilestones",
        OtherModernTurningPoints => "OtherModernTurningPoints",
    }
}

impl TurningPointCategory {
    /// Human-readable label used in prompts.
    pub fn label(self) -> &'static str {
        match self {
            Self::InitialFormation => "Initial Formation",
            Self::RelationshipDevelopment => "Relationship Development",
            Self::ChallengesOrTests => "Challenges or Tests",
            Self::ConflictAndRepair => "Conflict & Repair",
            Self::DeepeningOrMilestones => "Deepening or Milestones",
            Self::OtherModernTurningPoints => "Other Modern Turning Points",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Self::InitialFormation => {
                "first disclosures, early exclusivity talk, clarifying intentions"
            }
            Self::RelationshipDevelopment => {
                "negotiating routines and roles, aligning values, setting boundaries"
            }
            Self::ChallengesOrTests => {
                "relocation, financial strain, time scarcity, third-party competition"
            }
            Self::ConflictAndRepair => {
                "grievance episodes, apologies and forgiveness, boundary renegotiation"
            }
            Self::DeepeningOrMilestones => {
                "cohabitation, engagement or marriage, parenting or caregiving, health events"
            }
            Self::OtherModernTurningPoints => {
                "social-media stressors, online ties, immigration or visa issues, public visibility"
            }
        }
    }
}

token_enum! {
    /// Which partner of the dyad.
    pub enum Partner: "partner" {
        A => "A",
        B => "B",
    }
}

impl Partner {
    pub fn other(self) -> Partner {
        match self {
            Partner::A => Partner::B,
            Partner::B => Partner::A,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Partner::A => 0,
            Partner::B => 1,
        }
    }
}

token_enum! {
    /// Two-year relationship status.
    pub enum OutcomeLabel: "outcome label" {
        BrokenUpOrDivorced => "broken_up_or_divorced",
        Dating => "dating",
        Engaged => "engaged",
        Married => "married",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn category_parse_is_closed() {
        assert_eq!(TurningPointCategory::ALL.len(), 6);
        for c in TurningPointCategory::ALL {
            assert_eq!(c.as_str().parse::<TurningPointCategory>().unwrap(), *c);
        }
        let err = "Romance".parse::<TurningPointCategory>().unwrap_err();
        assert_eq!(err.token, "Romance");
        assert!("conflictandrepair".parse::<TurningPointCategory>().is_err());
    }

    #[test]
    fn serde_uses_tokens() {
        let json = serde_json::to_string(&OutcomeLabel::BrokenUpOrDivorced).unwrap();
        assert_eq!(json, "\"broken_up_or_divorced\"");
        assert!(serde_json::from_str::<OutcomeLabel>("\"divorced\"").is_err());
    }
}
