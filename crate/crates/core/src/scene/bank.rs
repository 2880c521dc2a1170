//! Scenario bank: generic turning-point ideas, one category each.
//!
//! Stored as one JSON object per line: `{id, category, synopsis, tags}`.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain::TurningPointCategory;
use crate::util::derive_seed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub category: TurningPointCategory,
    pub synopsis: String,
    pub tags: Vec<String>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum BankError {
    #[error("{0}")]
    Io(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown category {token:?}")]
    UnknownCategory { line: usize, token: String },
    #[error("line {line}: duplicate scenario id {id:?}")]
    Duplicate { line: usize, id: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScenarioBank {
    scenarios: Vec<Scenario>,
}

impl ScenarioBank {
    /// Rejects duplicate ids; `line` in errors is the 1-based position.
    pub fn new(scenarios: Vec<Scenario>) -> Result<Self, BankError> {
        let mut seen = BTreeSet::new();
        for (i, s) in scenarios.iter().enumerate() {
            if !seen.insert(s.id.as_str()) {
                return Err(BankError::Duplicate {
                    line: i + 1,
                    id: s.id.clone(),
                });
            }
        }
        Ok(Self { scenarios })
    }

    pub fn parse(text: &str) -> Result<Self, BankError> {
        let mut scenarios = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let v: Value = serde_json::from_str(raw).map_err(|e| BankError::Parse {
                line,
                message: e.to_string(),
            })?;
            if let Some(tok) = v.get("category").and_then(Value::as_str) {
                if tok.parse::<TurningPointCategory>().is_err() {
                    return Err(BankError::UnknownCategory {
                        line,
                        token: tok.to_string(),
                    });
                }
            }
            let s: Scenario = serde_json::from_value(v).map_err(|e| BankError::Parse {
                line,
                message: e.to_string(),
            })?;
            if s.id.trim().is_empty() || s.synopsis.trim().is_empty() {
                return Err(BankError::Parse {
                    line,
                    message: "id and synopsis must be non-empty".into(),
                });
            }
            if !seen.insert(s.id.clone()) {
                return Err(BankError::Duplicate { line, id: s.id });
            }
            scenarios.push(s);
        }
        Ok(Self { scenarios })
    }

    pub fn load(path: &Path) -> Result<Self, BankError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BankError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_jsonl(&self) -> String {
        self.scenarios
            .iter()
            .map(|s| serde_json::to_string(s).expect("scenarios serialize") + "\n")
            .collect()
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn pool(&self, category: TurningPointCategory) -> Vec<&Scenario> {
        self.scenarios
            .iter()
            .filter(|s| s.category == category)
            .collect()
    }

    pub fn get(&self, id: &str) -> Option<&Scenario> {
        self.scenarios.iter().find(|s| s.id == id)
    }
}

type Curated = (&'static str, &'static [&'static str]);

fn curated(category: TurningPointCategory) -> &'static [Curated] {
    use TurningPointCategory::*;
    match category {
        InitialFormation => &[
            (
                "One partner asks whether they are seeing anyone else.",
                &["exclusivity", "clarity"],
            ),
            (
                "The first time one partner says \"I love you\" and waits for a reply.",
                &["disclosure", "clarity"],
            ),
            (
                "A friend asks what they are to each other and neither has an answer.",
                &["labels", "network"],
            ),
            (
                "One partner shares a painful family story on the third date.",
                &["disclosure", "trust"],
            ),
            (
                "Deciding whether to delete the dating apps together.",
                &["exclusivity", "alternatives"],
            ),
            (
                "Meeting after a week of unanswered texts.",
                &["intentions", "uncertainty"],
            ),
            (
                "One partner invites the other to a sibling's wedding as their date.",
                &["network", "labels"],
            ),
            (
                "A holiday plan forces the question of whether to travel together.",
                &["future", "clarity"],
            ),
            (
                "Being introduced to a coworker as \"a friend\".",
                &["labels", "hurt"],
            ),
            (
                "Talking about what each wants in five years over a late dinner.",
                &["future", "values"],
            ),
        ],
        RelationshipDevelopment => &[
            (
                "Dividing chores after one partner starts staying over most nights.",
                &["routines", "roles"],
            ),
            (
                "Deciding how to spend a shared free weekend with different preferences.",
                &["routines", "values"],
            ),
            (
                "One partner wants more alone time on weeknights.",
                &["boundaries", "autonomy"],
            ),
            (
                "Agreeing how often to see each other's families.",
                &["network", "boundaries"],
            ),
            (
                "Setting up a shared calendar and arguing about what goes on it.",
                &["routines", "coordination"],
            ),
            (
                "Discovering different views on saving versus spending.",
                &["finances", "values"],
            ),
            (
                "One partner starts a new hobby that takes most evenings.",
                &["autonomy", "time"],
            ),
            (
                "Negotiating who cooks and who cleans.",
                &["roles", "fairness"],
            ),
            (
                "Deciding whether to adopt a dog together.",
                &["investment", "future"],
            ),
            (
                "Talking about religion and how to observe holidays.",
                &["values", "family"],
            ),
        ],
        ChallengesOrTests => &[
            (
                "One partner is offered a job in another city.",
                &["relocation", "transition"],
            ),
            (
                "A layoff leaves one partner unable to pay their share of rent.",
                &["finances", "stress"],
            ),
            (
                "Months of night shifts leave almost no shared time.",
                &["time", "transition"],
            ),
            (
                "An attractive coworker keeps messaging one partner late at night.",
                &["alternatives", "jealousy"],
            ),
            (
                "A long-distance stretch begins for a six-month training program.",
                &["distance", "transition"],
            ),
            (
                "One partner's parent falls ill and needs regular care.",
                &["caregiving", "stress"],
            ),
            (
                "A credit card debt one partner never mentioned comes to light.",
                &["finances", "secrecy"],
            ),
            (
                "An ex reaches out wanting to meet for coffee.",
                &["alternatives", "trust"],
            ),
            (
                "Graduate school applications may split them across the country.",
                &["future", "transition"],
            ),
            (
                "A visa deadline forces a decision about moving abroad.",
                &["relocation", "deadline"],
            ),
        ],
        ConflictAndRepair => &[
            (
                "A forgotten anniversary turns into a fight about priorities.",
                &["grievance", "repair"],
            ),
            (
                "A sarcastic remark in front of friends leads to a silent drive home.",
                &["contempt", "repair"],
            ),
            (
                "One partner reads the other's messages and is caught.",
                &["trust", "boundaries"],
            ),
            (
                "An old argument about housework flares up again.",
                &["criticism", "repeat"],
            ),
            (
                "One partner apologizes for a broken promise and waits for forgiveness.",
                &["apology", "forgiveness"],
            ),
            (
                "A weekend ruined by a fight about in-laws.",
                &["network", "grievance"],
            ),
            (
                "Stonewalling after a disagreement about money lasts for days.",
                &["stonewalling", "finances"],
            ),
            (
                "Agreeing on a new rule for how to argue without yelling.",
                &["ritual", "repair"],
            ),
            (
                "One partner cancels plans last minute for the third time.",
                &["reliability", "grievance"],
            ),
            (
                "A jealous accusation after a party needs to be talked through.",
                &["jealousy", "repair"],
            ),
        ],
        DeepeningOrMilestones => &[
            (
                "Signing a lease for their first shared apartment.",
                &["cohabitation", "investment"],
            ),
            ("One partner plans a proposal.", &["engagement", "future"]),
            ("Opening a joint bank account.", &["finances", "investment"]),
            (
                "Talking seriously about having children.",
                &["parenting", "future"],
            ),
            (
                "Supporting each other through a surgery and recovery.",
                &["health", "caregiving"],
            ),
            (
                "Planning a wedding budget with both families' expectations.",
                &["marriage", "network"],
            ),
            (
                "Buying a car together with a shared loan.",
                &["investment", "finances"],
            ),
            (
                "Moving in with one partner's aging parent.",
                &["caregiving", "family"],
            ),
            (
                "Celebrating five years with a trip they saved for together.",
                &["milestone", "ritual"],
            ),
            (
                "Writing wills and naming each other as emergency contacts.",
                &["commitment", "future"],
            ),
        ],
        OtherModernTurningPoints => &[
            (
                "A social media post reveals one partner went out with an ex.",
                &["social media", "alternatives"],
            ),
            (
                "One partner keeps their relationship status hidden online.",
                &["visibility", "labels"],
            ),
            (
                "A close online friendship starts taking hours every night.",
                &["online ties", "alternatives"],
            ),
            (
                "An immigration interview requires proof of the relationship.",
                &["immigration", "visibility"],
            ),
            (
                "Friends publicly disapprove of the relationship in a group chat.",
                &["network", "social media"],
            ),
            (
                "A viral video of one partner creates unwanted attention.",
                &["visibility", "stress"],
            ),
            (
                "One partner wants to share location data at all times.",
                &["privacy", "boundaries"],
            ),
            (
                "A dating app notification appears on one partner's phone.",
                &["alternatives", "trust"],
            ),
            (
                "Family abroad pressures one partner to move back home.",
                &["network", "relocation"],
            ),
            (
                "Deciding whether to announce the engagement online.",
                &["visibility", "milestone"],
            ),
        ],
    }
}

const SETTINGS: &[&str] = &[
    "at home on a weeknight",
    "during a weekend trip",
    "at a friend's birthday party",
    "over breakfast",
    "in the car",
    "at a family dinner",
    "on a walk",
    "late at night by text",
];

fn slug(category: TurningPointCategory) -> &'static str {
    use TurningPointCategory::*;
    match category {
        InitialFormation => "if",
        RelationshipDevelopment => "rd",
        ChallengesOrTests => "ct",
        ConflictAndRepair => "cr",
        DeepeningOrMilestones => "dm",
        OtherModernTurningPoints => "mt",
    }
}

/// Builds a bank with `per_category` scenarios per category. The first ten
/// of each category are the curated ideas; further entries re-situate
/// curated ideas in seeded settings.
pub fn generate_bank(per_category: usize, seed: u64) -> ScenarioBank {
    let mut scenarios = Vec::new();
    for &category in TurningPointCategory::ALL {
        let base = curated(category);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[
            b"bank",
            &seed.to_le_bytes(),
            category.as_str().as_bytes(),
        ]));
        let mut settings: Vec<&str> = SETTINGS.to_vec();
        for i in 0..per_category {
            let (synopsis, tags) = base[i % base.len()];
            let round = i / base.len();
            let synopsis = if round == 0 {
                synopsis.to_string()
            } else {
                if i % base.len() == 0 {
                    settings.shuffle(&mut rng);
                }
                let setting = settings[(round - 1 + i) % settings.len()];
                format!("{} It happens {setting} (variant {round}).", synopsis)
            };
            scenarios.push(Scenario {
                id: format!("{}-{:03}", slug(category), i + 1),
                category,
                synopsis,
                tags: tags.iter().map(|t| t.to_string()).collect(),
            });
        }
    }
    ScenarioBank::new(scenarios).expect("generated ids are unique")
}
