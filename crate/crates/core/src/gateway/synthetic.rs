//! Deterministic model stand-in for offline batches.
//!
//! Every reply is a pure function of the backend seed and the prompt, so a
//! batch re-run with the same seed reproduces byte-identical traces. Replies
//! are built from the same prompt sections the real pipeline sends: persona
//! cue phrases steer decisions, a small option library carries the
//! constructive/destructive tone of each choice into state inference and
//! commitment scoring, and a keyword lexicon drives affect.

use async_trait::async_trait;
use serde_json::{json, Value};

use super::embedder::HashEmbedder;
use super::{Backend, BackendError, ChatRequest, Completion, PromptSpec, Usage};
use crate::domain::{Partner, TurningPointCategory, AFFECT_NAMES};
use crate::persona::synthetic::cue;
use crate::prompts::{role, sec};
use crate::util::{derive_seed, unit_hash, word_count};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tone {
    Repair,
    Invest,
    Clarify,
    Escalate,
    Withdraw,
    Rival,
}

impl Tone {
    fn constructive(self) -> bool {
        matches!(self, Tone::Repair | Tone::Invest | Tone::Clarify)
    }
}

const CONSTRUCTIVE: [Tone; 3] = [Tone::Repair, Tone::Invest, Tone::Clarify];
const DESTRUCTIVE: [Tone; 3] = [Tone::Escalate, Tone::Withdraw, Tone::Rival];

/// Option wording by tone. Descriptions are matched back verbatim when the
/// transcript is read, so every entry is unique across tones.
const LIBRARY: &[(Tone, &str)] = &[
    (
        Tone::Repair,
        "Apologizes for their part and asks what would help",
    ),
    (
        Tone::Repair,
        "Reaches for their partner's hand and names the hurt calmly",
    ),
    (
        Tone::Repair,
        "Proposes a short break and a time to come back to the talk",
    ),
    (
        Tone::Invest,
        "Suggests concrete plans they can build on together next month",
    ),
    (
        Tone::Invest,
        "Offers to take on a shared cost so the plan can go ahead",
    ),
    (
        Tone::Invest,
        "Introduces their partner warmly to the people who matter to them",
    ),
    (
        Tone::Clarify,
        "Says plainly what they want from the relationship and asks the same",
    ),
    (
        Tone::Clarify,
        "Asks an open question and listens without interrupting",
    ),
    (
        Tone::Clarify,
        "Checks that they understood their partner by repeating it back",
    ),
    (
        Tone::Escalate,
        "Snaps back with a sharp accusation about past mistakes",
    ),
    (
        Tone::Escalate,
        "Raises their voice and refuses to let the point drop",
    ),
    (
        Tone::Escalate,
        "Rolls their eyes and answers with open contempt",
    ),
    (
        Tone::Withdraw,
        "Goes quiet and leaves the room without a word",
    ),
    (
        Tone::Withdraw,
        "Changes the subject and stays busy on their phone",
    ),
    (
        Tone::Withdraw,
        "Agrees on the surface but keeps their real feelings to themselves",
    ),
    (
        Tone::Rival,
        "Keeps texting an attractive acquaintance during the evening",
    ),
    (
        Tone::Rival,
        "Mentions that an old flame reached out and seems pleased about it",
    ),
    (
        Tone::Rival,
        "Makes weekend plans with a new crush instead of their partner",
    ),
];

fn tone_of(text: &str) -> Option<Tone> {
    LIBRARY
        .iter()
        .find(|(_, d)| text.contains(d))
        .map(|(t, _)| *t)
}

/// Keywords that raise one affect dimension.
const LEXICON: &[(&str, &[&str])] = &[
    (
        "joy",
        &[
            "laugh", "smile", "warm", "celebrat", "plans", "together", "happy",
        ],
    ),
    (
        "sadness",
        &[
            "quiet", "alone", "leaves", "silence", "hurt", "tears", "sad",
        ],
    ),
    (
        "fear",
        &["worr", "anxious", "uncertain", "afraid", "nervous", "risk"],
    ),
    (
        "surprise",
        &["sudden", "unexpected", "reached out", "news", "surpris"],
    ),
    (
        "anger",
        &[
            "snaps", "sharp", "accus", "voice", "furious", "slammed", "contempt",
        ],
    ),
    (
        "disgust",
        &["contempt", "rolls their eyes", "disgust", "betray"],
    ),
    (
        "trust",
        &[
            "apolog",
            "listens",
            "honest",
            "hand",
            "understood",
            "reassur",
            "warmly",
        ],
    ),
    (
        "anticipation",
        &["next", "future", "upcoming", "move", "plan", "waiting"],
    ),
];

fn lexicon_affect(text: &str) -> [f64; 8] {
    let lower = text.to_lowercase();
    let mut out = [0.05; 8];
    for (name, words) in LEXICON {
        let i = AFFECT_NAMES
            .iter()
            .position(|n| n == name)
            .expect("known dimension");
        let hits = words.iter().filter(|w| lower.contains(*w)).count();
        out[i] = (0.05 + 0.3 * hits as f64).min(1.0);
    }
    out
}

fn affect_json(values: [f64; 8]) -> Value {
    let map: serde_json::Map<String, Value> = AFFECT_NAMES
        .iter()
        .zip(values)
        .map(|(n, v)| (n.to_string(), json!((v * 100.0).round() / 100.0)))
        .collect();
    Value::Object(map)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn first_sentence(text: &str) -> &str {
    let text = text.trim();
    match text.find(['.', '!', '?']) {
        Some(i) => &text[..=i],
        None => text,
    }
}

/// `key: value` line lookup inside a section.
fn field<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines().find_map(|l| {
        l.trim()
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix(':'))
            .map(str::trim)
    })
}

fn leading_number(text: &str) -> Option<f64> {
    let t: String = text
        .trim()
        .chars()
        .take_while(|c| c.is_ascii_digit() || *c == '.')
        .collect();
    t.parse().ok()
}

fn decision_lines(transcript: &str) -> Vec<&str> {
    transcript
        .lines()
        .filter(|l| l.contains("] DECISION by partner"))
        .collect()
}

fn event_ref(line: &str) -> Option<String> {
    let rest = line.strip_prefix('[')?;
    Some(rest[..rest.find(']')?].to_string())
}

/// Offline backend whose replies depend only on `(seed, prompt)`.
#[derive(Debug, Clone)]
pub struct SyntheticBackend {
    embedder: HashEmbedder,
    seed: u64,
}

impl SyntheticBackend {
    pub fn new(dimension: usize, seed: u64) -> Self {
        Self {
            embedder: HashEmbedder::new(dimension, seed),
            seed,
        }
    }

    /// Produces the JSON reply for one prompt.
    pub fn respond(&self, spec: &PromptSpec) -> Result<Value, BackendError> {
        let ctx = Ctx {
            spec,
            key: derive_seed(&[&self.seed.to_le_bytes(), spec.digest().as_bytes()]),
        };
        let v = match spec.role_tag.as_str() {
            role::INSTRUMENT_SUMMARY => ctx.instrument_summary(),
            role::PERSONA_FUSION => ctx.persona_fusion(),
            role::BASELINE_COMMITMENT => ctx.baseline_commitment(),
            role::APPRAISAL => ctx.appraisal(),
            role::AFFECT_EMBEDDING => {
                json!({ "affect": affect_json(lexicon_affect(ctx.get(sec::TEXT))) })
            }
            role::DECISION => ctx.decision(),
            role::SCENARIO_SELECTION => ctx.scenario_selection(),
            role::SCENE_EXPANSION => ctx.scene_expansion(),
            role::NARRATION => ctx.narration(),
            role::OPTIONS => ctx.options(),
            role::STATE_INFERENCE => ctx.state_inference(),
            role::COMMITMENT => ctx.commitment(),
            role::ROLLING_SUMMARY => ctx.summary(),
            role::END_STATE_PREDICTION => ctx.end_state(),
            other => {
                return Err(BackendError::Script(format!(
                    "synthetic backend has no responder for role {other:?}"
                )))
            }
        };
        Ok(v)
    }
}

#[async_trait]
impl Backend for SyntheticBackend {
    fn name(&self) -> &str {
        "synthetic"
    }

    async fn complete(&self, request: &ChatRequest<'_>) -> Result<Completion, BackendError> {
        let text = self.respond(request.spec)?.to_string();
        let prompt_words: usize = request
            .messages
            .iter()
            .map(|m| word_count(&m.content))
            .sum();
        Ok(Completion {
            usage: Usage {
                prompt_tokens: prompt_words as u64,
                completion_tokens: word_count(&text) as u64,
            },
            text,
        })
    }

    async fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        Ok(self.embedder.embed(text))
    }

    fn embedding_dimension(&self) -> usize {
        self.embedder.dimension()
    }
}

struct Ctx<'a> {
    spec: &'a PromptSpec,
    key: u64,
}

const NARRATIVE_FILLER: &[&str] = &[
    "You tend to notice small changes in your partner's mood before they say anything.",
    "Your days are busy, and you guard the few evenings that belong to the two of you.",
    "You care about being treated fairly, and you keep a quiet tally when things feel uneven.",
    "Friends describe you as loyal, though you do not always say what you need.",
    "You like routines that make life predictable, and surprises can throw you off balance.",
    "When you feel appreciated you become generous with your time and attention.",
    "Money and chores are topics you would rather settle early than argue about later.",
    "You draw on family examples, both good and bad, when you picture your future.",
    "You remember promises carefully and feel let down when plans slip without warning.",
    "Humor is one of the ways you reconnect after a tense moment.",
    "You want a partner who shows up consistently more than one who makes grand gestures.",
    "In stressful weeks you can become short with the people closest to you.",
    "You would rather talk a problem through over a walk than across a table.",
    "Small rituals, like a shared coffee in the morning, matter more to you than you admit.",
    "You find it easier to apologize with actions than with words.",
    "You notice when your effort goes unacknowledged, even if you do not mention it.",
    "Time with friends recharges you, and you expect your partner to make room for it.",
    "You are cautious about big commitments until you have seen how someone handles a hard week.",
    "Disagreements about schedules bother you more than disagreements about values.",
    "You value honesty, even when it is uncomfortable to hear.",
    "You like to plan trips and milestones well ahead and share the planning.",
    "When you are tired you need quiet before you can talk about anything serious.",
];

fn cue_sentence(c: &str) -> (&'static str, &'static str, &'static str) {
    match c {
        cue::SECURE => (
            "You generally describe a secure attachment: you trust that closeness will hold even after a disagreement.",
            "your partner seems distant",
            "ask directly how they are doing and assume good intent",
        ),
        cue::ANXIOUS => (
            "You report an anxious attachment: silence or delays from your partner quickly feel like a sign of trouble.",
            "your partner does not reply for a while",
            "seek reassurance, sometimes more than once",
        ),
        cue::AVOIDANT => (
            "You show an avoidant attachment: too much closeness can feel like pressure, and you protect your independence.",
            "your partner asks for more closeness",
            "create distance and keep some plans to yourself",
        ),
        cue::COLLABORATOR => (
            "In conflict you prefer to talk it through until both of you feel heard.",
            "a disagreement starts",
            "slow down, name the problem, and look for a shared fix",
        ),
        cue::PURSUER => (
            "In conflict you pursue the issue and push for an answer right away.",
            "an argument is left unresolved",
            "press the point until your partner responds",
        ),
        cue::WITHDRAWER => (
            "In conflict you tend to withdraw into silence until the tension passes.",
            "voices start to rise",
            "go quiet or leave the room",
        ),
        cue::HIGH_INVESTMENT => (
            "You are heavily invested in the relationship through shared plans, money, and friends.",
            "a chance comes to build something together",
            "commit time and resources to it",
        ),
        cue::LOW_INVESTMENT => (
            "You are lightly invested so far, keeping finances and plans mostly separate.",
            "a shared commitment is proposed",
            "hesitate and keep your options open",
        ),
        cue::CURIOUS => (
            "You enjoy outside attention and notice when others show interest in you.",
            "someone new flirts with you",
            "enjoy the attention rather than shut it down",
        ),
        _ => (
            "You are living through heavy stress at work and at home, which leaves little patience.",
            "pressure builds outside the relationship",
            "become irritable and less available",
        ),
    }
}

impl Ctx<'_> {
    fn get(&self, name: &str) -> &str {
        self.spec.get(name).unwrap_or_default()
    }

    fn u(&self, label: &str) -> f64 {
        unit_hash(self.key, label)
    }

    fn pick<'s, T>(&self, label: &str, items: &'s [T]) -> &'s T {
        let i = (self.u(label) * items.len() as f64) as usize;
        &items[i.min(items.len() - 1)]
    }

    fn instrument_summary(&self) -> Value {
        let doc = self.get(sec::DOCUMENT);
        let lead = first_sentence(doc);
        json!({
            "synopsis": format!("{lead} Other details in this report are unknown."),
            "evidence": [lead],
        })
    }

    fn persona_fusion(&self) -> Value {
        let synopses = self.get(sec::SYNOPSES).to_lowercase();
        let cues: Vec<&str> = cue::WEIGHTS
            .iter()
            .map(|(c, _)| *c)
            .filter(|c| synopses.contains(c))
            .collect();
        let mut sentences: Vec<&str> = cues.iter().map(|c| cue_sentence(c).0).collect();
        let target = 220 + (self.u("length") * 50.0) as usize;
        let start = (self.u("filler") * NARRATIVE_FILLER.len() as f64) as usize;
        for i in 0..NARRATIVE_FILLER.len() {
            if word_count(&sentences.join(" ")) >= target {
                break;
            }
            sentences.push(NARRATIVE_FILLER[(start + i) % NARRATIVE_FILLER.len()]);
        }
        while word_count(&sentences.join(" ")) > 290 {
            sentences.pop();
        }
        let mut playbook: Vec<Value> = cues
            .iter()
            .take(7)
            .map(|c| {
                let (_, condition, action) = cue_sentence(c);
                json!({ "condition": condition, "action": action })
            })
            .collect();
        let generic = [
            (
                "plans change at the last minute",
                "say how it affects you before agreeing",
            ),
            ("your partner shares good news", "celebrate it with them"),
            (
                "you feel overlooked",
                "ask for time together rather than hint",
            ),
            (
                "a family obligation comes up",
                "discuss it with your partner before committing",
            ),
            ("money gets tight", "check in before making large purchases"),
        ];
        for (c, a) in generic {
            if playbook.len() >= 5 {
                break;
            }
            playbook.push(json!({ "condition": c, "action": a }));
        }
        json!({ "narrative": sentences.join(" "), "playbook": playbook })
    }

    fn baseline_commitment(&self) -> Value {
        let risk = cue::risk(self.get(sec::PERSONA_A)) + cue::risk(self.get(sec::PERSONA_B));
        let score = (3.6 - 0.35 * risk + (self.u("noise") - 0.5) * 0.4).clamp(1.0, 5.0);
        json!({
            "score": (score * 100.0).round() / 100.0,
            "rationale": "Estimated from the investment, alternatives and conflict patterns in both personas.",
            "evidence_refs": [],
        })
    }

    fn appraisal(&self) -> Value {
        let persona = self.get(sec::YOUR_PERSONA);
        let context = self.get(sec::CURRENT_CONTEXT);
        let history = self.get(sec::RECENT_HISTORY);
        let recent = history.lines().rev().take(3).collect::<Vec<_>>().join(" ");
        let mut v = lexicon_affect(&format!("{context} {recent}"));
        let risk = cue::risk(persona);
        let idx = |n: &str| {
            AFFECT_NAMES
                .iter()
                .position(|x| *x == n)
                .expect("known dimension")
        };
        v[idx("fear")] = (v[idx("fear")] + 0.1 * risk.max(0.0)).min(1.0);
        v[idx("trust")] = (v[idx("trust")] + 0.1 * (-risk).max(0.0)).min(1.0);
        let dominant =
            AFFECT_NAMES[v
                .iter()
                .enumerate()
                .fold(0, |best, (i, x)| if *x > v[best] { i } else { best })];
        let thought = match dominant {
            "anger" => "I am tired of this happening again and I want it to stop.",
            "sadness" => "This hurts more than I want to admit.",
            "fear" => "I am worried about where this is heading for us.",
            "trust" => "I think we can get through this if we are honest with each other.",
            "joy" => "Moments like this remind me why we are together.",
            "anticipation" => "I keep thinking about what comes next for us.",
            _ => "I need a moment to work out what I actually want here.",
        };
        json!({ "affect": affect_json(v), "internal_thought": thought })
    }

    fn decision(&self) -> Value {
        let persona = self.get(sec::YOUR_PERSONA);
        let options: Vec<(String, String)> = self
            .get(sec::ACTION_OPTIONS)
            .lines()
            .filter_map(|l| l.split_once(": "))
            .map(|(id, d)| (id.trim().to_string(), d.trim().to_string()))
            .collect();
        if options.is_empty() {
            return json!({ "action": "(no options)", "reasoning": "" });
        }
        let thought = self.get(sec::INTERNAL_THOUGHT).to_lowercase();
        let mut lean = 1.0 - 0.9 * cue::risk(persona);
        if thought.contains("tired of this") || thought.contains("hurts") {
            lean -= 0.4;
        }
        let constructive = self.u("tone") < sigmoid(lean);
        let pool: Vec<&(String, String)> = options
            .iter()
            .filter(|(_, d)| tone_of(d).is_none_or(|t| t.constructive() == constructive))
            .collect();
        let pool = if pool.is_empty() {
            options.iter().collect()
        } else {
            pool
        };
        let (id, desc) = *self.pick("option", &pool);
        let confidence = 0.55 + 0.4 * self.u("confidence");
        let reasoning = if constructive {
            "This fits who I am and protects what we have built."
        } else {
            "I am protecting myself right now, even if it costs us."
        };
        json!({
            "action": format!("{id}: {desc}"),
            "reasoning": reasoning,
            "option_id": id,
            "confidence": (confidence * 100.0).round() / 100.0,
            "emotion_tags": [if constructive { "trust" } else { "anger" }],
        })
    }

    fn scenario_selection(&self) -> Value {
        let ids: Vec<&str> = self
            .get(sec::CANDIDATES)
            .lines()
            .filter_map(|l| l.split_once(':').map(|(id, _)| id.trim()))
            .filter(|id| !id.is_empty())
            .collect();
        let id = if ids.is_empty() {
            ""
        } else {
            *self.pick("scenario", &ids)
        };
        json!({ "scenario_id": id, "reason": "It fits where the couple is right now." })
    }

    fn scene_expansion(&self) -> Value {
        let scenario = self.get(sec::SCENARIO);
        let synopsis = field(scenario, "synopsis").unwrap_or("an ordinary evening");
        let tags = field(scenario, "tags").unwrap_or_default();
        let category = field(scenario, "category")
            .and_then(|c| c.split_whitespace().next())
            .and_then(|c| c.parse::<TurningPointCategory>().ok())
            .unwrap_or(TurningPointCategory::RelationshipDevelopment);
        let settings = [
            "their shared kitchen on a weeknight",
            "a crowded cafe near work",
            "the car on the drive home",
            "a friend's birthday party",
            "the living room late at night",
            "a walk through the park on Sunday",
        ];
        let stakes = match category {
            TurningPointCategory::InitialFormation => {
                "whether they define the relationship or drift"
            }
            TurningPointCategory::RelationshipDevelopment => {
                "how fairly they share their everyday life"
            }
            TurningPointCategory::ChallengesOrTests => {
                "whether the relationship holds under outside pressure"
            }
            TurningPointCategory::ConflictAndRepair => {
                "whether the hurt is repaired or left to grow"
            }
            TurningPointCategory::DeepeningOrMilestones => {
                "whether they take the next big step together"
            }
            TurningPointCategory::OtherModernTurningPoints => {
                "how much outside forces shape their trust"
            }
        };
        let third = tags.contains("third-party") || tags.contains("rival");
        json!({
            "theme": category.label(),
            "setting": *self.pick("setting", &settings),
            "NPC": if third { vec!["a friend who knows them both"] } else { Vec::new() },
            "current_scene": synopsis,
            "character_1_goal": "Partner A wants to feel respected and keep the evening on track.",
            "character_2_goal": "Partner B wants their view taken seriously before anything is decided.",
            "scene_conflict": format!("They disagree about what this means for them: {synopsis}"),
            "stakes": stakes,
            "third_party": if third { Value::from("a third person whose presence matters") } else { Value::Null },
        })
    }

    fn narration(&self) -> Value {
        let progress = self.get(sec::PROGRESS);
        let scene = self.get(sec::SCENE_STATE);
        let decisions = field(progress, "decisions so far")
            .and_then(leading_number)
            .unwrap_or(0.0) as u32;
        let max = progress
            .split("of at most ")
            .nth(1)
            .and_then(leading_number)
            .unwrap_or(3.0) as u32;
        let steps = field(progress, "narration steps since the last decision")
            .and_then(leading_number)
            .unwrap_or(0.0) as u32;
        let last: Option<Partner> =
            field(progress, "last acting partner").and_then(|p| p.parse().ok());
        let scene_key = derive_seed(&[scene.as_bytes()]);
        let target = (2 + (unit_hash(scene_key, "decisions") < 0.5) as u32).min(max.max(1));
        let transcript = self.get(sec::TRANSCRIPT);
        let last_decision = decision_lines(transcript).last().copied();
        let mood = match last_decision.and_then(tone_of) {
            Some(t) if t.constructive() => "The air between them softens a little.",
            Some(_) => "The tension in the room sharpens.",
            None => "Neither of them has said what they are really thinking yet.",
        };
        if decisions >= target {
            return json!({
                "narration": format!("{mood} The moment passes and the evening settles into what it has become."),
                "stop": false,
                "acting_partner": Value::Null,
                "scene_complete": true,
            });
        }
        if decisions == 0 && steps == 0 {
            let setting = field(scene, "setting").unwrap_or("home");
            return json!({
                "narration": format!("The scene opens at {setting}. {mood}"),
                "stop": false,
                "acting_partner": Value::Null,
                "scene_complete": false,
            });
        }
        let actor = match last {
            Some(p) => p.other(),
            None if unit_hash(scene_key, "first") < 0.5 => Partner::A,
            None => Partner::B,
        };
        json!({
            "narration": format!("{mood} Partner {actor} has to decide how to respond."),
            "stop": true,
            "acting_partner": actor.as_str(),
            "scene_complete": false,
        })
    }

    fn options(&self) -> Value {
        let actor = self.get(sec::ACTING_PARTNER).trim().to_string();
        let n = 3 + (self.u("count") < 0.5) as usize;
        let mut tones: Vec<Tone> = vec![
            *self.pick("c1", &CONSTRUCTIVE),
            *self.pick("d1", &DESTRUCTIVE),
        ];
        let rest: Vec<Tone> = CONSTRUCTIVE
            .iter()
            .chain(DESTRUCTIVE.iter())
            .copied()
            .filter(|t| !tones.contains(t))
            .collect();
        let offset = (self.u("rest") * rest.len() as f64) as usize;
        for i in 0..(n - 2) {
            tones.push(rest[(offset + i) % rest.len()]);
        }
        let mut options: Vec<(f64, Value)> = tones
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let variants: Vec<&str> = LIBRARY
                    .iter()
                    .filter(|(x, _)| x == t)
                    .map(|(_, d)| *d)
                    .collect();
                let d = *self.pick(&format!("variant{i}"), &variants);
                (
                    self.u(&format!("order{i}")),
                    json!({ "description": d, "actor": actor }),
                )
            })
            .collect();
        options.sort_by(|a, b| a.0.total_cmp(&b.0));
        json!({
            "acting_partner": actor,
            "options": options.into_iter().map(|(_, o)| o).collect::<Vec<_>>(),
        })
    }

    fn state_inference(&self) -> Value {
        let transcript = self.get(sec::TRANSCRIPT);
        let previous = self.get(sec::PREVIOUS_STATE);
        let prev = |f: &str| field(previous, f).unwrap_or("unknown").to_string();
        let tones: Vec<Tone> = decision_lines(transcript)
            .into_iter()
            .filter_map(tone_of)
            .collect();
        let count = |t: Tone| tones.iter().filter(|x| **x == t).count();
        let good = tones.iter().filter(|t| t.constructive()).count();
        let bad = tones.len() - good;
        let conflict = if count(Tone::Escalate) > 0 && count(Tone::Repair) == 0 {
            "active"
        } else if count(Tone::Repair) > 0
            && matches!(
                prev("conflict").as_str(),
                "active" | "unresolved" | "brewing"
            )
        {
            "repaired"
        } else if bad > good {
            "unresolved"
        } else if bad > 0 {
            "brewing"
        } else {
            "none"
        };
        let repair = if count(Tone::Repair) > 0 {
            if bad == 0 {
                "successful"
            } else {
                "attempted"
            }
        } else if bad > 0 && conflict != "none" {
            "failed"
        } else {
            "none"
        };
        let clarity = if count(Tone::Clarify) > 0 {
            "explicit".to_string()
        } else if count(Tone::Withdraw) > 0 {
            "unclear".to_string()
        } else if prev("clarity") == "unknown" {
            "tacit".to_string()
        } else {
            prev("clarity")
        };
        self.state_json(conflict, repair, &clarity, &tones, &prev, bad, good)
    }

    #[allow(clippy::too_many_arguments)]
    fn state_json(
        &self,
        conflict: &str,
        repair: &str,
        clarity: &str,
        tones: &[Tone],
        prev: &dyn Fn(&str) -> String,
        bad: usize,
        good: usize,
    ) -> Value {
        let count = |t: Tone| tones.iter().filter(|x| **x == t).count();
        let constraints = match (count(Tone::Invest), prev("constraints").as_str()) {
            (0, "unknown") => "none".to_string(),
            (0, p) => p.to_string(),
            (_, "emerging" | "accrued") => "accrued".to_string(),
            _ => "emerging".to_string(),
        };
        let alternatives = match count(Tone::Rival) {
            0 if prev("alternatives") == "hot" => "salient",
            0 => "quiet",
            1 => "salient",
            _ => "hot",
        };
        let category = self
            .get(sec::CATEGORY)
            .split_whitespace()
            .next()
            .unwrap_or_default()
            .to_string();
        let transition = if category == "DeepeningOrMilestones" || category == "ChallengesOrTests" {
            if good > bad {
                "underway"
            } else {
                "upcoming"
            }
        } else {
            "none"
        };
        let network = match (
            good > bad,
            self.get(sec::SCENE_STATE).contains("third_party"),
        ) {
            (true, _) => "supportive",
            (false, true) => "mixed",
            (false, false) => "neutral",
        };
        let prev_breakup = prev("breakup_marker");
        let breakup = if bad >= 2 && good == 0 {
            if prev_breakup == "soft" && self.u("hard") < 0.5 {
                "hard"
            } else {
                "soft"
            }
        } else if prev_breakup == "soft" && good == 0 {
            "soft"
        } else {
            "none"
        };
        json!({
            "conflict": conflict,
            "repair_outcome": repair,
            "clarity": clarity,
            "constraints": constraints,
            "alternatives": alternatives,
            "transition": transition,
            "network": network,
            "breakup_marker": breakup,
            "category": category,
        })
    }

    fn commitment(&self) -> Value {
        let previous = self.get(sec::PREVIOUS_ESTIMATE);
        let prev = field(previous, "score")
            .and_then(leading_number)
            .unwrap_or(3.2);
        let state = self.get(sec::RELATIONSHIP_STATE);
        let transcript = self.get(sec::TRANSCRIPT);
        let lines = decision_lines(transcript);
        let tones: Vec<Tone> = lines.iter().copied().filter_map(tone_of).collect();
        let good = tones.iter().filter(|t| t.constructive()).count() as f64;
        let bad = tones.len() as f64 - good;
        let mut score = prev + 0.2 * good - 0.3 * bad;
        if field(state, "repair_outcome") == Some("successful") {
            score += 0.1;
        }
        if field(state, "alternatives") == Some("hot") {
            score -= 0.2;
        }
        let breakup = field(state, "breakup_marker").unwrap_or("none");
        match breakup {
            "soft" => score = score.min(prev - 0.3),
            "hard" => score = score.min(prev - 1.0),
            _ => {}
        }
        score += (self.u("noise") - 0.5) * 0.1;
        let score = (score.clamp(1.0, 5.0) * 100.0).round() / 100.0;
        let rationale = format!(
            "{} constructive and {} destructive moves this scene; alternatives {}, repair {}, breakup marker {}.",
            good,
            bad,
            field(state, "alternatives").unwrap_or("unknown"),
            field(state, "repair_outcome").unwrap_or("unknown"),
            breakup
        );
        let refs: Vec<String> = lines.iter().filter_map(|l| event_ref(l)).collect();
        json!({ "score": score, "rationale": rationale, "evidence_refs": refs })
    }

    fn summary(&self) -> Value {
        let previous = self.get(sec::PREVIOUS_SUMMARY);
        let scene = self.get(sec::SCENE_STATE);
        let mut parts: Vec<String> = if previous.starts_with('(') {
            Vec::new()
        } else {
            previous.split("\n").map(str::to_string).collect()
        };
        let moves: Vec<String> = decision_lines(self.get(sec::TRANSCRIPT))
            .iter()
            .filter_map(|l| {
                let partner = l.split("partner ").nth(1)?.chars().next()?;
                let what = l.rsplit(": ").next()?.trim_end_matches('.').to_lowercase();
                Some(format!("{partner} {what}"))
            })
            .collect();
        parts.push(format!(
            "{} at {}: {}.",
            field(scene, "theme").unwrap_or("A scene"),
            field(scene, "setting").unwrap_or("home"),
            if moves.is_empty() {
                "nothing was decided".to_string()
            } else {
                moves.join("; ")
            }
        ));
        while parts.len() > 1 && word_count(&parts.join("\n")) > 140 {
            parts.remove(0);
        }
        json!({ "summary": parts.join("\n") })
    }

    fn end_state(&self) -> Value {
        let risk = cue::risk(self.get(sec::PERSONA_A)) + cue::risk(self.get(sec::PERSONA_B));
        let summaries = self.get(sec::SCENE_SUMMARIES);
        let last_score = summaries
            .lines()
            .filter_map(|l| {
                l.trim()
                    .strip_prefix("commitment:")
                    .and_then(leading_number)
            })
            .next_back();
        let p_dissolve = match last_score {
            Some(s) => sigmoid(2.2 * (2.8 - s) + 0.3 * risk - 0.3),
            None => sigmoid(0.6 * risk - 0.6),
        };
        let label = if self.u("end") < p_dissolve {
            "broken_up_or_divorced"
        } else {
            *self.pick("sustained", &["dating", "engaged", "married"])
        };
        json!({ "label": label, "rationale": "Weighed the couple's trajectory and risk factors." })
    }
}
