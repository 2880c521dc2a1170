//! Prompt text assets and the role tags / section names shared by every
//! pipeline step. Backends that synthesize responses key off these names, so
//! they live in one place.

use crate::domain::{OutcomeLabel, RelationshipState, AFFECT_NAMES, STATE_FIELDS};

/// `role_tag` values, one per pipeline step.
pub mod role {
    pub const INSTRUMENT_SUMMARY: &str = "instrument_summary";
    pub const PERSONA_FUSION: &str = "persona_fusion";
    pub const BASELINE_COMMITMENT: &str = "baseline_commitment";
    pub const APPRAISAL: &str = "appraisal";
    pub const AFFECT_EMBEDDING: &str = "affect_embedding";
    pub const DECISION: &str = "decision";
    pub const SCENARIO_SELECTION: &str = "scenario_selection";
    pub const SCENE_EXPANSION: &str = "scene_expansion";
    pub const NARRATION: &str = "narration";
    pub const OPTIONS: &str = "options";
    pub const STATE_INFERENCE: &str = "state_inference";
    pub const COMMITMENT: &str = "commitment";
    pub const ROLLING_SUMMARY: &str = "rolling_summary";
    pub const END_STATE_PREDICTION: &str = "end_state_prediction";
}

/// Section names used by more than one module.
pub mod sec {
    pub const TASK: &str = "Task";
    pub const OUTPUT: &str = "Output";
    pub const DOCUMENT: &str = "Document";
    pub const INSTRUMENT: &str = "Instrument";
    pub const SYNOPSES: &str = "Synopses";
    pub const RUBRIC: &str = "Rubric";
    pub const PERSONA_A: &str = "Partner A Persona";
    pub const PERSONA_B: &str = "Partner B Persona";
    pub const YOUR_PERSONA: &str = "Your Persona";
    pub const TEXT: &str = "Text";
    pub const CURRENT_CONTEXT: &str = "Current Context";
    pub const RECENT_HISTORY: &str = "Recent History";
    pub const INTERNAL_THOUGHT: &str = "Most Recent Internal Thought";
    pub const SCENE_HISTORY: &str = "Scene History";
    pub const MEMORIES: &str = "Relevant Memories";
    pub const ACTION_OPTIONS: &str = "Action Options";
    pub const PREVIOUS_SUMMARY: &str = "Previous Summary";
    pub const RELATIONSHIP_STATE: &str = "Relationship State";
    pub const PREVIOUS_STATE: &str = "Previous State";
    pub const CATEGORY: &str = "Category";
    pub const CANDIDATES: &str = "Candidates";
    pub const SCENARIO: &str = "Scenario";
    pub const SCENE_STATE: &str = "Scene State";
    pub const TRANSCRIPT: &str = "Transcript";
    pub const PROGRESS: &str = "Progress";
    pub const ACTING_PARTNER: &str = "Acting Partner";
    pub const ACTING_PERSONA: &str = "Acting Partner Persona";
    pub const VOCABULARY: &str = "Vocabulary";
    pub const PREVIOUS_ESTIMATE: &str = "Previous Estimate";
    pub const LABELS: &str = "Labels";
    pub const SCENE_SUMMARIES: &str = "Scene Summaries";
}

pub const INSTRUMENT_SUMMARY_TASK: &str = "Condense this baseline instrument into a short synopsis of how the subject behaves in their relationship. Evidence or silence: every claim must be supported by a snippet copied verbatim from the document; where the document is thin on a topic, say \"unknown\" rather than guessing.";
pub const INSTRUMENT_SUMMARY_OUTPUT: &str =
    "{\"synopsis\": \"2-4 sentences\", \"evidence\": [\"verbatim snippet\", ...]}";

pub const PERSONA_FUSION_TASK: &str = "Fuse the synopses below into one persona for this subject. Write a narrative in the second person (\"You ...\") of 200 to 300 words covering attachment, conflict style, investments and outside ties. Then write a playbook of 5 to 7 if-then rules that turn this evidence into concrete behaviors. Where the subject's own report and their partner's report disagree, keep both views and say so. Do not add facts that the synopses do not support.";
pub const PERSONA_FUSION_OUTPUT: &str =
    "{\"narrative\": \"...\", \"playbook\": [{\"condition\": \"...\", \"action\": \"...\"}, ...]}";

pub const BASELINE_COMMITMENT_TASK: &str = "Estimate this couple's commitment using only the two personas below. No scenes have been simulated; base the estimate on the persona evidence alone.";
pub const COMMITMENT_OUTPUT: &str =
    "{\"score\": number between 1 and 5, \"rationale\": \"...\", \"evidence_refs\": [\"event id\", ...]}";

pub const APPRAISAL_TASK: &str = "Appraise how you feel right now. Score each affect dimension from 0 (absent) to 1 (overwhelming) given your persona, what has happened so far, and the current context. Then write one short paragraph of internal thought in the first person.";
pub const APPRAISAL_OUTPUT: &str = "{\"affect\": {\"joy\": 0.0, \"sadness\": 0.0, \"fear\": 0.0, \"surprise\": 0.0, \"anger\": 0.0, \"disgust\": 0.0, \"trust\": 0.0, \"anticipation\": 0.0}, \"internal_thought\": \"...\"}";

pub const AFFECT_EMBEDDING_TASK: &str = "Score the emotional content of the text on each affect dimension from 0 (absent) to 1 (overwhelming). Judge the text alone, without further context.";
pub const AFFECT_EMBEDDING_OUTPUT: &str = "{\"affect\": {\"joy\": 0.0, \"sadness\": 0.0, \"fear\": 0.0, \"surprise\": 0.0, \"anger\": 0.0, \"disgust\": 0.0, \"trust\": 0.0, \"anticipation\": 0.0}}";

pub const SCENARIO_SELECTION_TASK: &str = "Pick the single candidate turning point that best fits this couple now: their personas, what has happened so far, and their current relationship state. Answer with one candidate id from the list.";
pub const SCENARIO_SELECTION_OUTPUT: &str = "{\"scenario_id\": \"...\", \"reason\": \"...\"}";

pub const SCENE_EXPANSION_TASK: &str = "Expand the scenario into a concrete scene for this couple. Fill every field: theme, setting, NPC (names or roles of other people present, may be empty), current_scene (what is happening as the scene opens), character_1_goal (partner A), character_2_goal (partner B), scene_conflict (the tension the scene turns on), stakes (what could change), and third_party if someone outside the couple is involved. Stay consistent with the previous summary.";
pub const SCENE_EXPANSION_OUTPUT: &str = "{\"theme\": \"...\", \"setting\": \"...\", \"NPC\": [\"...\"], \"current_scene\": \"...\", \"character_1_goal\": \"...\", \"character_2_goal\": \"...\", \"scene_conflict\": \"...\", \"stakes\": \"...\", \"third_party\": \"...\" or null}";

pub const NARRATION_TASK: &str = "Advance the scene by one short beat of narration in the third person. Describe only what can be observed; never decide for either partner. Set \"stop\" to true at a natural point where one partner must act, and name that partner in \"acting_partner\". Set \"scene_complete\" to true when the scene has reached its resolution and no further decision is needed.";
pub const NARRATION_OUTPUT: &str =
    "{\"narration\": \"...\", \"stop\": false, \"acting_partner\": \"A\" or \"B\" or null, \"scene_complete\": false}";

pub const OPTIONS_TASK: &str = "Offer the acting partner 3 or 4 options for what to do next. Each option is one observable behavior of the acting partner alone, the options are mutually exclusive, and each leads to a different relational consequence (for example repair, escalation, withdrawal, deeper investment).";
pub const OPTIONS_OUTPUT: &str =
    "{\"acting_partner\": \"A\" or \"B\", \"options\": [{\"description\": \"...\", \"actor\": \"A\" or \"B\"}, ...]}";

pub const STATE_INFERENCE_TASK: &str = "Evaluate the evidence in this scene for each of the eight relationship state fields and give the token that best describes the couple now. Use only the listed vocabulary; use \"unknown\" when the scene gives no evidence. Also confirm which turning-point category the scene belonged to.";
pub const STATE_INFERENCE_OUTPUT: &str = "{\"conflict\": \"...\", \"repair_outcome\": \"...\", \"clarity\": \"...\", \"constraints\": \"...\", \"alternatives\": \"...\", \"transition\": \"...\", \"network\": \"...\", \"breakup_marker\": \"...\", \"category\": \"...\"}";

pub const COMMITMENT_TASK: &str =
    "Score the couple's commitment after this scene using the rubric and the transcript.";

pub const ROLLING_SUMMARY_TASK: &str = "Update the running summary of this couple's story with the scene below. Keep what still matters from the previous summary, add what changed, and stay under 150 words.";
pub const ROLLING_SUMMARY_OUTPUT: &str = "{\"summary\": \"...\"}";

pub const END_STATE_PERSONAS_TASK: &str =
    "Predict this couple's relationship status two years from now using only the two personas.";
pub const END_STATE_SIMULATION_TASK: &str = "Predict this couple's relationship status two years from now. Use the two personas and the ordered summaries of their simulated scenes with the commitment estimate and rationale after each scene.";
pub const END_STATE_OUTPUT: &str = "{\"label\": \"one of the labels\", \"rationale\": \"...\"}";

/// Versioned commitment rubric shared by baseline and per-scene scoring.
pub const COMMITMENT_RUBRIC_VERSION: &str = "commitment-rubric/v1";
pub const COMMITMENT_RUBRIC: &str = include_str!("../assets/commitment-rubric-v1.txt");

/// Decision prompt sections, in order.
pub mod decision {
    pub const ROLE_SECTION: &str = "Role";
    pub const ROLE: &str = "You are currently in a romantic relationship and facing a decision.";
    pub const INSTRUCTIONS_SECTION: &str = "Instructions";
    pub const INSTRUCTIONS: &str = "- Carefully review the list of candidate actions. Do not invent or modify options---choose only from those provided.
- Select the action that best fits the character's personality traits, current motivations, and the central conflict of the scene.
- Consider the character's recent history and prior events. Ensure your choice maintains narrative continuity and does not contradict what has already happened.
- Do not include dialogue, internal monologue, or describe future actions by other characters. Focus on a concrete, external action that can be enacted in the next scene.";
    pub const CRITERIA_SECTION: &str =
        "Selection criteria (use qualitative judgment, not numeric scoring)";
    pub const CRITERIA: &str = "- Relevance to the current scene conflict
- Consistency with the character's personality, goals, and constraints
- Likelihood to cause a meaningful state change (e.g., in trust, closeness, autonomy, conflict intensity, commitment, resources, or reputation)
- Plausibility and reversibility within the story context";
    pub const OUTPUT: &str = "Output the result as a valid dictionary in the following format.
Do not include any other strings or literals:
{
\"action\": \"realistic, personality-based next action with tone\",
\"reasoning\": \"why was this action chosen\"
}";
    pub const OPTION_REFERENCE_SECTION: &str = "Option Reference";
    pub const OPTION_REFERENCE: &str = "Start \"action\" with the id of the option you chose (for example \"o2: ...\"). You may also add \"option_id\", \"confidence\" (0 to 1) and \"emotion_tags\" (affect dimension names).";
    pub const EMPTY_MEMORIES: &str = "(none retrieved)";
}

pub fn affect_dimensions() -> String {
    AFFECT_NAMES.join(", ")
}

/// Field-by-field token lists for the relationship state.
pub fn state_vocabulary() -> String {
    STATE_FIELDS
        .iter()
        .map(|f| {
            let words = RelationshipState::vocabulary(f).expect("known field");
            format!("{f}: {}", words.join(", "))
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_state(state: &RelationshipState) -> String {
    state
        .tokens()
        .iter()
        .map(|(f, t)| format!("{f}: {t}"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn outcome_labels() -> String {
    OutcomeLabel::ALL
        .iter()
        .map(|l| l.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}
