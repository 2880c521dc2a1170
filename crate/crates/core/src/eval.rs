//! Outcome mapping, run aggregation, end-state prediction and the reported
//! statistics.
//!
//! Evaluation works on stored traces only: personas are read from trace
//! headers and simulation evidence from the recorded scenes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain::{OutcomeLabel, Persona, SimulationTrace};
use crate::gateway::schema::names;
use crate::gateway::{Gateway, GatewayError, PromptSpec};
use crate::persona::{self, PersonaError};
use crate::prompts::{self, role, sec};

/// z for a two-sided 95% normal interval.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadOutcome {
    pub dyad_id: String,
    pub baseline: OutcomeLabel,
    pub followup: OutcomeLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryChange {
    Improved,
    Stagnant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndState {
    Dissolved,
    Sustained,
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("modal label of an empty list")]
    Empty,
    #[error("dyad {0} has no traces")]
    NoTraces(String),
    #[error("dyad {0} has no recorded outcome")]
    NoOutcome(String),
    #[error("predictor returned an invalid label: {0}")]
    InvalidLabel(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Persona(#[from] PersonaError),
    #[error("truth file line {line}: {message}")]
    Truth { line: usize, message: String },
}

/// Improved iff a dating or engaged couple married; everything else,
/// including no change and dissolution, is stagnant.
pub fn map_binary_change(outcome: &DyadOutcome) -> BinaryChange {
    use OutcomeLabel::*;
    match (outcome.baseline, outcome.followup) {
        (Dating | Engaged, Married) => BinaryChange::Improved,
        _ => BinaryChange::Stagnant,
    }
}

pub fn map_end_state(label: OutcomeLabel) -> EndState {
    match label {
        OutcomeLabel::BrokenUpOrDivorced => EndState::Dissolved,
        _ => EndState::Sustained,
    }
}

/// Most frequent label; a tie goes to `Dissolved`.
pub fn modal_label(labels: &[EndState]) -> Result<EndState, EvalError> {
    if labels.is_empty() {
        return Err(EvalError::Empty);
    }
    let dissolved = labels.iter().filter(|l| **l == EndState::Dissolved).count();
    Ok(if 2 * dissolved >= labels.len() {
        EndState::Dissolved
    } else {
        EndState::Sustained
    })
}

fn log_factorials(n: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..=n {
        acc += (i as f64).ln();
        out.push(acc);
    }
    out
}

/// Two-sided exact binomial test: the total probability of every outcome
/// no more likely than the observed one. Computed in log space; outcomes
/// within a relative 1e-7 of the observed probability count as equal.
pub fn exact_binomial_p(successes: u64, n: u64, p0: f64) -> f64 {
    assert!(successes <= n, "successes must not exceed n");
    assert!((0.0..=1.0).contains(&p0), "p0 must be a probability");
    if p0 == 0.0 || p0 == 1.0 {
        let certain = if p0 == 0.0 { 0 } else { n };
        return if successes == certain { 1.0 } else { 0.0 };
    }
    let lf = log_factorials(n);
    let (lp, lq) = (p0.ln(), (1.0 - p0).ln());
    let log_pmf = |k: u64| {
        lf[n as usize] - lf[k as usize] - lf[(n - k) as usize] + k as f64 * lp + (n - k) as f64 * lq
    };
    let cutoff = log_pmf(successes) + (1.0f64 + 1e-7).ln();
    let p: f64 = (0..=n)
        .map(log_pmf)
        .filter(|l| *l <= cutoff)
        .map(f64::exp)
        .sum();
    p.min(1.0)
}

/// Normal-approximation 95% interval for `acc_b − acc_a`, in percentage
/// points.
pub fn diff_ci_normal(acc_a: f64, n_a: u64, acc_b: f64, n_b: u64) -> (f64, f64) {
    let se = (acc_a * (1.0 - acc_a) / n_a as f64 + acc_b * (1.0 - acc_b) / n_b as f64).sqrt();
    let d = acc_b - acc_a;
    (100.0 * (d - Z95 * se), 100.0 * (d + Z95 * se))
}

/// `acc_new / acc_base − 1`.
pub fn relative_improvement(acc_base: f64, acc_new: f64) -> f64 {
    assert!(acc_base > 0.0, "baseline accuracy must be positive");
    acc_new / acc_base - 1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortShift {
    pub cohort: String,
    pub baseline: f64,
    pub simulation: f64,
    pub delta: f64,
    pub pct_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub gap_baseline: f64,
    pub gap_simulation: f64,
    /// `None` when the baseline gap is zero.
    pub ratio: Option<f64>,
    pub cohorts: [CohortShift; 2],
}

/// Between-cohort gaps before and after simulation, and each cohort's shift.
/// Inputs are `(baseline mean, simulation mean)` per cohort.
pub fn group_separation(first: (&str, f64, f64), second: (&str, f64, f64)) -> SeparationReport {
    let shift = |(name, b, s): (&str, f64, f64)| CohortShift {
        cohort: name.to_string(),
        baseline: b,
        simulation: s,
        delta: s - b,
        pct_delta: 100.0 * (s - b) / b,
    };
    let gap_baseline = (first.1 - second.1).abs();
    let gap_simulation = (first.2 - second.2).abs();
    SeparationReport {
        gap_baseline,
        gap_simulation,
        ratio: (gap_baseline != 0.0).then(|| gap_simulation / gap_baseline),
        cohorts: [shift(first), shift(second)],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub n: u64,
    pub correct: u64,
    pub accuracy: f64,
    pub binomial_p_vs_half: f64,
    /// Present on the row compared against a baseline.
    pub diff_vs_baseline_pp: Option<f64>,
    pub ci95_pp: Option<(f64, f64)>,
    pub relative_improvement: Option<f64>,
}

impl PredictionReport {
    pub fn new(correct: u64, n: u64) -> Self {
        assert!(n > 0 && correct <= n, "need 0 <= correct <= n and n > 0");
        Self {
            n,
            correct,
            accuracy: correct as f64 / n as f64,
            binomial_p_vs_half: exact_binomial_p(correct, n, 0.5),
            diff_vs_baseline_pp: None,
            ci95_pp: None,
            relative_improvement: None,
        }
    }

    pub fn against(mut self, baseline: &PredictionReport) -> Self {
        self.diff_vs_baseline_pp = Some(100.0 * (self.accuracy - baseline.accuracy));
        self.ci95_pp = Some(diff_ci_normal(
            baseline.accuracy,
            baseline.n,
            self.accuracy,
            self.n,
        ));
        self.relative_improvement = (baseline.accuracy > 0.0)
            .then(|| relative_improvement(baseline.accuracy, self.accuracy));
        self
    }
}

// ---------------------------------------------------------------------------
// Prediction prompts

fn parse_label(v: &Value) -> Result<OutcomeLabel, String> {
    let raw = v["label"].as_str().unwrap_or_default();
    raw.trim()
        .to_lowercase()
        .parse()
        .map_err(|_| format!("label {raw:?} is not one of: {}", prompts::outcome_labels()))
}

/// Personas-only end-state prompt.
pub fn personas_only_prompt(a: &Persona, b: &Persona, seed: Option<u64>) -> PromptSpec {
    PromptSpec::new(role::END_STATE_PREDICTION, names::OUTCOME_PREDICTION)
        .seed(seed)
        .temperature(0.0)
        .section(sec::TASK, prompts::END_STATE_PERSONAS_TASK)
        .section(sec::PERSONA_A, a.render())
        .section(sec::PERSONA_B, b.render())
        .section(sec::LABELS, prompts::outcome_labels())
        .section(sec::OUTPUT, prompts::END_STATE_OUTPUT)
}

/// Ordered scene summaries with the commitment estimate after each scene.
pub fn render_scene_summaries(trace: &SimulationTrace) -> String {
    trace
        .scenes
        .iter()
        .map(|s| {
            format!(
                "Scene {} ({}):\nsummary: {}\ncommitment: {}\nrationale: {}",
                s.index + 1,
                s.category.label(),
                s.rolling_summary,
                s.commitment.score,
                s.commitment.rationale
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Simulation-aware end-state prompt for one run.
pub fn simulation_aware_prompt(trace: &SimulationTrace, seed: Option<u64>) -> PromptSpec {
    PromptSpec::new(role::END_STATE_PREDICTION, names::OUTCOME_PREDICTION)
        .seed(seed)
        .temperature(0.0)
        .section(sec::TASK, prompts::END_STATE_SIMULATION_TASK)
        .section(sec::PERSONA_A, trace.partner_a.render())
        .section(sec::PERSONA_B, trace.partner_b.render())
        .section(sec::SCENE_SUMMARIES, render_scene_summaries(trace))
        .section(sec::LABELS, prompts::outcome_labels())
        .section(sec::OUTPUT, prompts::END_STATE_OUTPUT)
}

async fn predict(gateway: &Gateway, spec: &PromptSpec) -> Result<OutcomeLabel, EvalError> {
    gateway
        .chat_checked(spec, 1, |v| parse_label(&v))
        .await
        .map_err(|e| match e {
            GatewayError::Rejected { reason, .. } => EvalError::InvalidLabel(reason),
            other => other.into(),
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionMode {
    PersonasOnly,
    SimulationAware,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndStatePrediction {
    /// One raw label per call (one for personas-only, one per run otherwise).
    pub labels: Vec<OutcomeLabel>,
    pub end_state: EndState,
}

/// One call for personas-only (personas from the first trace); one call
/// per trace for simulation-aware, aggregated by [`modal_label`].
pub async fn predict_end_state(
    gateway: &Gateway,
    mode: PredictionMode,
    traces: &[SimulationTrace],
    seed: Option<u64>,
) -> Result<EndStatePrediction, EvalError> {
    let first = traces
        .first()
        .ok_or_else(|| EvalError::NoTraces(String::new()))?;
    let labels = match mode {
        PredictionMode::PersonasOnly => {
            vec![
                predict(
                    gateway,
                    &personas_only_prompt(&first.partner_a, &first.partner_b, seed),
                )
                .await?,
            ]
        }
        PredictionMode::SimulationAware => {
            let mut out = Vec::with_capacity(traces.len());
            for t in traces {
                out.push(predict(gateway, &simulation_aware_prompt(t, seed)).await?);
            }
            out
        }
    };
    let states: Vec<EndState> = labels.iter().map(|l| map_end_state(*l)).collect();
    Ok(EndStatePrediction {
        end_state: modal_label(&states)?,
        labels,
    })
}

// ---------------------------------------------------------------------------
// Full evaluation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadEvaluation {
    pub dyad_id: String,
    pub truth: EndState,
    pub change: BinaryChange,
    pub runs: usize,
    pub personas_only: EndStatePrediction,
    pub simulation_aware: EndStatePrediction,
    pub baseline_commitment: f64,
    /// Mean final commitment over the dyad's runs.
    pub simulation_commitment: f64,
    pub run_commitments: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortMeans {
    pub improved: Option<f64>,
    pub stagnant: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub personas_only: PredictionReport,
    pub simulation_aware: PredictionReport,
    pub baseline_means: CohortMeans,
    /// Runs averaged per dyad, then dyads averaged per cohort.
    pub simulation_means_per_dyad: CohortMeans,
    /// All runs of a cohort pooled.
    pub simulation_means_pooled: CohortMeans,
    /// Cohort separation using per-dyad averaging; absent if a cohort is empty.
    pub separation: Option<SeparationReport>,
    pub dyads: Vec<DyadEvaluation>,
    pub skipped: Vec<String>,
}

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs
        .into_iter()
        .fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn cohort_means(
    dyads: &[DyadEvaluation],
    value: impl Fn(&DyadEvaluation) -> Vec<f64>,
) -> CohortMeans {
    let of = |c: BinaryChange| mean(dyads.iter().filter(|d| d.change == c).flat_map(&value));
    CohortMeans {
        improved: of(BinaryChange::Improved),
        stagnant: of(BinaryChange::Stagnant),
    }
}

async fn evaluate_dyad(
    gateway: &Gateway,
    outcome: &DyadOutcome,
    traces: &[SimulationTrace],
    seed: Option<u64>,
) -> Result<DyadEvaluation, EvalError> {
    if traces.is_empty() {
        return Err(EvalError::NoTraces(outcome.dyad_id.clone()));
    }
    let personas_only =
        predict_end_state(gateway, PredictionMode::PersonasOnly, traces, seed).await?;
    let simulation_aware =
        predict_end_state(gateway, PredictionMode::SimulationAware, traces, seed).await?;
    let (baseline, _) = persona::infer_baseline_commitment(
        gateway,
        &traces[0].partner_a,
        &traces[0].partner_b,
        seed,
    )
    .await?;
    let run_commitments: Vec<f64> = traces
        .iter()
        .filter_map(|t| t.final_commitment.as_ref().map(|c| c.score))
        .collect();
    Ok(DyadEvaluation {
        dyad_id: outcome.dyad_id.clone(),
        truth: map_end_state(outcome.followup),
        change: map_binary_change(outcome),
        runs: traces.len(),
        personas_only,
        simulation_aware,
        baseline_commitment: baseline.score,
        simulation_commitment: mean(run_commitments.iter().copied()).unwrap_or(baseline.score),
        run_commitments,
    })
}

/// Scores both predictors over every dyad that has an outcome and traces.
/// Dyads evaluate concurrently; the gateway bounds model traffic.
pub async fn evaluate(
    gateway: &Gateway,
    outcomes: &[DyadOutcome],
    traces: &BTreeMap<String, Vec<SimulationTrace>>,
    seed: Option<u64>,
) -> Result<EvaluationReport, EvalError> {
    let mut set = tokio::task::JoinSet::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        let Some(ts) = traces.get(&o.dyad_id).filter(|t| !t.is_empty()) else {
            skipped.push(o.dyad_id.clone());
            continue;
        };
        let (gw, o, ts) = (gateway.clone(), o.clone(), ts.clone());
        set.spawn(async move { evaluate_dyad(&gw, &o, &ts, seed).await });
    }
    let mut dyads = Vec::new();
    while let Some(joined) = set.join_next().await {
        dyads.push(joined.expect("evaluation task panicked")?);
    }
    dyads.sort_by(|a, b| a.dyad_id.cmp(&b.dyad_id));
    if dyads.is_empty() {
        return Err(EvalError::NoTraces("every dyad".into()));
    }
    let n = dyads.len() as u64;
    let count = |f: fn(&DyadEvaluation) -> EndState| {
        dyads.iter().filter(|d| f(d) == d.truth).count() as u64
    };
    let personas_only = PredictionReport::new(count(|d| d.personas_only.end_state), n);
    let simulation_aware =
        PredictionReport::new(count(|d| d.simulation_aware.end_state), n).against(&personas_only);

    let baseline_means = cohort_means(&dyads, |d| vec![d.baseline_commitment]);
    let simulation_means_per_dyad = cohort_means(&dyads, |d| vec![d.simulation_commitment]);
    let simulation_means_pooled = cohort_means(&dyads, |d| d.run_commitments.clone());
    let separation = match (
        baseline_means.stagnant,
        simulation_means_per_dyad.stagnant,
        baseline_means.improved,
        simulation_means_per_dyad.improved,
    ) {
        (Some(bs), Some(ss), Some(bi), Some(si)) => {
            Some(group_separation(("stagnant", bs, ss), ("improved", bi, si)))
        }
        _ => None,
    };
    Ok(EvaluationReport {
        personas_only,
        simulation_aware,
        baseline_means,
        simulation_means_per_dyad,
        simulation_means_pooled,
        separation,
        dyads,
        skipped,
    })
}

/// Plain-text accuracy table: model, correct / N, accuracy, p vs. 0.5.
pub fn render_table(report: &EvaluationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<26} {:>12} {:>9} {:>10}",
        "Model", "Correct / N", "Accuracy", "p vs 0.5"
    );
    for (name, r) in [
        ("Baseline (personas-only)", &report.personas_only),
        ("Simulation-aware", &report.simulation_aware),
    ] {
        let _ = writeln!(
            out,
            "{:<26} {:>12} {:>8.1}% {:>10.4}",
            name,
            format!("{}/{}", r.correct, r.n),
            100.0 * r.accuracy,
            r.binomial_p_vs_half
        );
    }
    let s = &report.simulation_aware;
    if let (Some(d), Some((lo, hi)), Some(rel)) =
        (s.diff_vs_baseline_pp, s.ci95_pp, s.relative_improvement)
    {
        let _ = writeln!(
            out,
            "\nDifference: {d:+.1} pp (95% CI [{lo:+.1}, {hi:+.1}] pp); relative improvement {:.1}%",
            100.0 * rel
        );
    }
    if let Some(sep) = &report.separation {
        let _ = writeln!(
            out,
            "\n{:<10} {:>9} {:>11} {:>8} {:>8}",
            "Cohort", "Baseline", "Simulation", "Delta", "%Delta"
        );
        for c in &sep.cohorts {
            let _ = writeln!(
                out,
                "{:<10} {:>9.4} {:>11.4} {:>+8.4} {:>+7.1}%",
                c.cohort, c.baseline, c.simulation, c.delta, c.pct_delta
            );
        }
        let ratio = sep
            .ratio
            .map(|r| format!("{r:.2}x"))
            .unwrap_or_else(|| "undefined".into());
        let _ = writeln!(
            out,
            "Gap: {:.4} -> {:.4} (ratio {ratio})",
            sep.gap_baseline, sep.gap_simulation
        );
    }
    out
}

/// Reads a truth file: one `{dyad_id, baseline, followup}` object per line.
pub fn parse_truth(text: &str) -> Result<Vec<DyadOutcome>, EvalError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| EvalError::Truth {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn truth_to_jsonl(outcomes: &[DyadOutcome]) -> String {
    outcomes
        .iter()
        .map(|o| serde_json::to_string(o).expect("outcomes serialize") + "\n")
        .collect()
}
