//! Seeded synthetic couples standing in for a private baseline dataset.
//!
//! Each subject gets an archetype (attachment style, conflict role,
//! investment, outside ties, stress) rendered as seven instrument documents:
//! self- and partner-reported conflict descriptions plus one document per
//! remaining kind. Every document opens with a sentence carrying the
//! subject's cue phrases, so an evidence-linked summary of the first
//! sentence keeps the archetype recoverable downstream.
//!
//! Each dyad also gets a baseline/follow-up outcome drawn from a logistic
//! risk model over both archetypes.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{InstrumentDoc, InstrumentKind, OutcomeLabel, Reporter};
use crate::eval::DyadOutcome;
use crate::util::derive_seed;

/// Phrases that carry archetype information through summaries and personas.
pub mod cue {
    pub const SECURE: &str = "secure attachment";
    pub const ANXIOUS: &str = "anxious attachment";
    pub const AVOIDANT: &str = "avoidant attachment";
    pub const COLLABORATOR: &str = "talk it through";
    pub const PURSUER: &str = "pursue the issue";
    pub const WITHDRAWER: &str = "withdraw into silence";
    pub const HIGH_INVESTMENT: &str = "heavily invested";
    pub const LOW_INVESTMENT: &str = "lightly invested";
    pub const CURIOUS: &str = "outside attention";
    pub const HIGH_STRESS: &str = "heavy stress";

    /// Risk weight of each cue when found in a persona.
    pub const WEIGHTS: &[(&str, f64)] = &[
        (SECURE, -0.6),
        (ANXIOUS, 0.8),
        (AVOIDANT, 1.0),
        (COLLABORATOR, -0.5),
        (PURSUER, 0.5),
        (WITHDRAWER, 0.7),
        (HIGH_INVESTMENT, -0.6),
        (LOW_INVESTMENT, 0.9),
        (CURIOUS, 1.0),
        (HIGH_STRESS, 0.6),
    ];

    /// Sum of weights of the cues present in `text` (case-insensitive).
    pub fn risk(text: &str) -> f64 {
        let lower = text.to_lowercase();
        WEIGHTS
            .iter()
            .filter(|(c, _)| lower.contains(c))
            .map(|(_, w)| w)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attachment {
    Secure,
    Anxious,
    Avoidant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictRole {
    Collaborator,
    Pursuer,
    Withdrawer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Investment {
    Low,
    Moderate,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Archetype {
    pub attachment: Attachment,
    pub conflict_role: ConflictRole,
    pub investment: Investment,
    pub curious_about_others: bool,
    pub high_stress: bool,
}

impl Archetype {
    fn sample(rng: &mut ChaCha8Rng) -> Self {
        let attachment = *[
            Attachment::Secure,
            Attachment::Secure,
            Attachment::Anxious,
            Attachment::Avoidant,
        ]
        .choose(rng)
        .expect("non-empty");
        let conflict_role = *[
            ConflictRole::Collaborator,
            ConflictRole::Pursuer,
            ConflictRole::Withdrawer,
        ]
        .choose(rng)
        .expect("non-empty");
        let investment = *[Investment::Low, Investment::Moderate, Investment::High]
            .choose(rng)
            .expect("non-empty");
        Self {
            attachment,
            conflict_role,
            investment,
            curious_about_others: rng.random_bool(0.3),
            high_stress: rng.random_bool(0.35),
        }
    }

    fn attachment_cue(self) -> &'static str {
        match self.attachment {
            Attachment::Secure => cue::SECURE,
            Attachment::Anxious => cue::ANXIOUS,
            Attachment::Avoidant => cue::AVOIDANT,
        }
    }

    fn role_cue(self) -> &'static str {
        match self.conflict_role {
            ConflictRole::Collaborator => cue::COLLABORATOR,
            ConflictRole::Pursuer => cue::PURSUER,
            ConflictRole::Withdrawer => cue::WITHDRAWER,
        }
    }

    /// Cue phrases this archetype emits.
    pub fn cues(self) -> Vec<&'static str> {
        let mut out = vec![self.attachment_cue(), self.role_cue()];
        match self.investment {
            Investment::High => out.push(cue::HIGH_INVESTMENT),
            Investment::Low => out.push(cue::LOW_INVESTMENT),
            Investment::Moderate => {}
        }
        if self.curious_about_others {
            out.push(cue::CURIOUS);
        }
        if self.high_stress {
            out.push(cue::HIGH_STRESS);
        }
        out
    }

    pub fn risk(self) -> f64 {
        cue::risk(&self.cues().join(" "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSubject {
    pub subject_id: String,
    pub archetype: Archetype,
    pub docs: Vec<InstrumentDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDyad {
    pub dyad_id: String,
    pub partner_a: SyntheticSubject,
    pub partner_b: SyntheticSubject,
    pub outcome: DyadOutcome,
}

const FIRST_NAMES: &[&str] = &[
    "Alex", "Jordan", "Sam", "Riley", "Morgan", "Casey", "Jamie", "Taylor", "Avery", "Quinn",
    "Robin", "Drew", "Rowan", "Skyler", "Emerson", "Hayden", "Parker", "Reese", "Sage", "Kendall",
];

const JOBS: &[&str] = &[
    "a nurse",
    "a software tester",
    "a teacher",
    "a line cook",
    "an accountant",
    "a graduate student",
    "a retail manager",
    "an electrician",
    "a social worker",
    "a graphic designer",
];

const INTERESTS: &[&str] = &[
    "climbing",
    "board games",
    "cooking",
    "running",
    "live music",
    "gardening",
    "photography",
    "volunteering",
    "video games",
    "reading",
];

/// Generates `count` dyads; the same `(count, seed)` always yields the same
/// corpus and outcomes.
pub fn generate_dyads(count: usize, seed: u64) -> Vec<SyntheticDyad> {
    (0..count)
        .map(|i| {
            let dyad_id = format!("d{:03}", i + 1);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[
                b"synthetic-dyad",
                &seed.to_le_bytes(),
                dyad_id.as_bytes(),
            ]));
            let years_together = rng.random_range(1..=12u32);
            let name_a = *FIRST_NAMES.choose(&mut rng).expect("non-empty");
            let name_b = loop {
                let n = *FIRST_NAMES.choose(&mut rng).expect("non-empty");
                if n != name_a {
                    break n;
                }
            };
            let arch_a = Archetype::sample(&mut rng);
            let arch_b = Archetype::sample(&mut rng);
            let partner_a = subject(
                &mut rng,
                &dyad_id,
                "a",
                name_a,
                name_b,
                arch_a,
                years_together,
            );
            let partner_b = subject(
                &mut rng,
                &dyad_id,
                "b",
                name_b,
                name_a,
                arch_b,
                years_together,
            );
            let outcome = draw_outcome(&mut rng, &dyad_id, arch_a, arch_b);
            SyntheticDyad {
                dyad_id,
                partner_a,
                partner_b,
                outcome,
            }
        })
        .collect()
}

fn draw_outcome(rng: &mut ChaCha8Rng, dyad_id: &str, a: Archetype, b: Archetype) -> DyadOutcome {
    let baseline = *[
        OutcomeLabel::Dating,
        OutcomeLabel::Dating,
        OutcomeLabel::Dating,
        OutcomeLabel::Engaged,
        OutcomeLabel::Married,
        OutcomeLabel::Married,
    ]
    .choose(rng)
    .expect("non-empty");
    let mut risk = a.risk() + b.risk();
    if matches!(
        (a.conflict_role, b.conflict_role),
        (ConflictRole::Pursuer, ConflictRole::Withdrawer)
            | (ConflictRole::Withdrawer, ConflictRole::Pursuer)
    ) {
        risk += 0.8;
    }
    let p_dissolve = 1.0 / (1.0 + (-(risk - 1.5) / 0.8).exp());
    let followup = if rng.random_bool(p_dissolve.clamp(0.02, 0.98)) {
        OutcomeLabel::BrokenUpOrDivorced
    } else {
        match baseline {
            OutcomeLabel::Dating if rng.random_bool(0.35) => OutcomeLabel::Married,
            OutcomeLabel::Dating if rng.random_bool(0.3) => OutcomeLabel::Engaged,
            OutcomeLabel::Engaged if rng.random_bool(0.6) => OutcomeLabel::Married,
            other => other,
        }
    };
    DyadOutcome {
        dyad_id: dyad_id.to_string(),
        baseline,
        followup,
    }
}

fn subject(
    rng: &mut ChaCha8Rng,
    dyad_id: &str,
    side: &str,
    name: &str,
    partner: &str,
    arch: Archetype,
    years: u32,
) -> SyntheticSubject {
    let subject_id = format!("{dyad_id}-{side}");
    let age = rng.random_range(22..=45u32);
    let job = *JOBS.choose(rng).expect("non-empty");
    let interest = *INTERESTS.choose(rng).expect("non-empty");
    let att = arch.attachment_cue();
    let role = arch.role_cue();

    let investment_line = match arch.investment {
        Investment::High => format!(
            "I am {} in our life together: shared savings, a lease, weekly rituals.",
            cue::HIGH_INVESTMENT
        ),
        Investment::Low => format!(
            "I am {} so far; we keep separate money and separate plans.",
            cue::LOW_INVESTMENT
        ),
        Investment::Moderate => {
            "We share some routines and split the rent, but keep most finances apart.".to_string()
        }
    };
    let stress_line = if arch.high_stress {
        format!(
            "Work has me under {} most weeks and I get short-tempered when tired.",
            cue::HIGH_STRESS
        )
    } else {
        "My stress is usually manageable and I recover quickly after a bad day.".to_string()
    };
    let ties_line = if arch.curious_about_others {
        format!(
            "{name} enjoys {} from other people and keeps in touch with an ex.",
            cue::CURIOUS
        )
    } else {
        format!("{name} spends free time on {interest} and mostly with mutual friends.")
    };
    let role_3p = match arch.conflict_role {
        ConflictRole::Collaborator => {
            format!("When we disagree, {name} wants to {role} calmly until we agree.")
        }
        ConflictRole::Pursuer => {
            format!("When we disagree, {name} tends to {role} and push for an answer right away.")
        }
        ConflictRole::Withdrawer => {
            format!("When we disagree, {name} tends to {role} and leave the room.")
        }
    };
    let role_1p = match arch.conflict_role {
        ConflictRole::Collaborator => {
            format!("In arguments I try to {role} and look for a compromise.")
        }
        ConflictRole::Pursuer => {
            format!("In arguments I {role} until it is settled, even late at night.")
        }
        ConflictRole::Withdrawer => {
            format!("In arguments I {role} because raised voices overwhelm me.")
        }
    };
    let attachment_line = match arch.attachment {
        Attachment::Secure => format!("I describe my style as {att}: I trust {partner} and say what I need."),
        Attachment::Anxious => format!("I describe my style as {att}: I worry {partner} will lose interest and I seek reassurance."),
        Attachment::Avoidant => format!("I describe my style as {att}: I value independence and pull back when things get close."),
    };

    let doc = |kind, reporter, text: String| InstrumentDoc {
        kind,
        subject_id: subject_id.clone(),
        reporter,
        text,
    };
    let docs = vec![
        doc(
            InstrumentKind::Ctss,
            Reporter::SelfReported,
            format!("{role_1p} {stress_line} Afterwards I usually want to move on quickly."),
        ),
        doc(
            InstrumentKind::Ctss,
            Reporter::Partner,
            format!("{role_3p} {name} rarely raises problems first, but remembers them."),
        ),
        doc(
            InstrumentKind::Ersi,
            Reporter::SelfReported,
            format!("{stress_line} I plan my week carefully and dislike last-minute changes. I am {job}."),
        ),
        doc(
            InstrumentKind::Rpd,
            Reporter::Partner,
            format!(
                "{name} is {job} and comes home around six. {ties_line} On weekends {name} likes {interest}."
            ),
        ),
        doc(
            InstrumentKind::SelfReport,
            Reporter::SelfReported,
            format!(
                "{attachment_line} I am {age} and have been with {partner} for {years} years. {investment_line}"
            ),
        ),
        doc(
            InstrumentKind::Sfn,
            Reporter::Partner,
            format!("{ties_line} Friends describe {name} as loyal and a little private."),
        ),
        doc(
            InstrumentKind::Vplst,
            Reporter::SelfReported,
            format!(
                "{investment_line} Money and time with friends are our main sources of tension."
            ),
        ),
    ];
    SyntheticSubject {
        subject_id,
        archetype: arch,
        docs,
    }
}
