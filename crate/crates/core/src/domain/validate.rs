//! Structural validation of run traces.

use std::fmt;

use serde::Serialize;

use super::state::{BreakupMarker, Constraints};
use super::trace::{SceneEvent, SimulationTrace};
use super::types::{COMMITMENT_MAX, COMMITMENT_MIN};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Hard violations make a trace invalid; warnings flag suspicious but
/// admissible bookkeeping.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn violation(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }

    fn warning(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.warnings.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }
}

fn check_commitment(report: &mut ValidationReport, path: &str, score: f64) {
    if !(COMMITMENT_MIN..=COMMITMENT_MAX).contains(&score) {
        report.violation(
            path,
            format!("commitment {score} ∉ [{COMMITMENT_MIN},{COMMITMENT_MAX}]"),
        );
    }
}

pub fn validate_trace(trace: &SimulationTrace) -> ValidationReport {
    let mut report = ValidationReport::default();

    if let Some(err) = &trace.error {
        report.violation("error", format!("run aborted: {err}"));
    }
    if trace.config.embedding_dimension == 0 {
        report.violation("config.embedding_dimension", "must be positive");
    }

    let mut previous_summary = String::new();
    let mut previous_state = None;
    for (i, scene) in trace.scenes.iter().enumerate() {
        let p = format!("scenes[{i}]");
        if scene.index as usize != i {
            report.violation(
                format!("{p}.index"),
                format!("index {} at position {i}", scene.index),
            );
        }
        if scene.scene_state.previous_summary != previous_summary {
            report.violation(
                format!("{p}.scene_state.previous_summary"),
                "does not equal the previous scene's rolling summary",
            );
        }
        if scene.scene_state.scene_conflict.trim().is_empty() {
            report.violation(format!("{p}.scene_state.scene_conflict"), "empty");
        }
        for (j, set) in scene.option_sets.iter().enumerate() {
            for v in set.violations() {
                report.violation(format!("{p}.option_sets[{j}]"), v);
            }
        }
        if scene.decisions.len() != scene.option_sets.len() {
            report.violation(
                format!("{p}.decisions"),
                format!(
                    "{} decisions for {} option sets",
                    scene.decisions.len(),
                    scene.option_sets.len()
                ),
            );
        }
        for (j, decision) in scene.decisions.iter().enumerate() {
            let dp = format!("{p}.decisions[{j}]");
            match scene.option_sets.get(j) {
                Some(set) => {
                    if set.get(&decision.chosen_option_id).is_none() {
                        report.violation(
                            format!("{dp}.chosen_option_id"),
                            format!(
                                "{} not in presented options {:?}",
                                decision.chosen_option_id,
                                set.ids()
                            ),
                        );
                    }
                    if decision.partner != set.acting_partner {
                        report.violation(
                            format!("{dp}.partner"),
                            format!(
                                "{} acted but {} was the acting partner",
                                decision.partner, set.acting_partner
                            ),
                        );
                    }
                    if let Some(shadow) = &decision.shadow_option_id {
                        if set.get(shadow).is_none() {
                            report.violation(
                                format!("{dp}.shadow_option_id"),
                                format!("{shadow} not presented"),
                            );
                        }
                    }
                }
                None => report.violation(dp.to_string(), "no matching option set"),
            }
            if let Some(c) = decision.confidence {
                if !(0.0..=1.0).contains(&c) {
                    report.violation(format!("{dp}.confidence"), format!("{c} ∉ [0,1]"));
                }
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for event in &scene.transcript {
            if !seen.insert(event.id().to_string()) {
                report.violation(
                    format!("{p}.transcript"),
                    format!("duplicate event id {}", event.id()),
                );
            }
            if let SceneEvent::OptionsPresented { option_set, .. } = event {
                if *option_set >= scene.option_sets.len() {
                    report.violation(
                        format!("{p}.transcript"),
                        format!("event {} refers to missing option set", event.id()),
                    );
                }
            }
        }
        for r in &scene.commitment.evidence_refs {
            if !seen.contains(r) {
                report.warning(
                    format!("{p}.commitment.evidence_refs"),
                    format!("{r} is not a transcript event"),
                );
            }
        }
        check_commitment(
            &mut report,
            &format!("{p}.commitment.score"),
            scene.commitment.score,
        );
        let m = scene.metrics;
        for (name, v) in [
            ("dedication", m.dedication),
            ("alternatives", m.alternatives),
            ("investments", m.investments),
        ] {
            if !(0.0..=1.0).contains(&v) {
                report.violation(format!("{p}.metrics.{name}"), format!("{v} ∉ [0,1]"));
            }
        }
        if let Some(prev) = previous_state {
            let prev: super::state::RelationshipState = prev;
            if prev.constraints == Constraints::Accrued
                && scene.inferred_state.constraints == Constraints::None
                && matches!(
                    scene.inferred_state.breakup_marker,
                    BreakupMarker::None | BreakupMarker::Unknown
                )
            {
                report.warning(
                    format!("{p}.inferred_state.constraints"),
                    "constraints fell from accrued to none without a breakup marker",
                );
            }
        }
        previous_state = Some(scene.inferred_state);
        previous_summary = scene.rolling_summary.clone();
    }

    match (&trace.final_commitment, trace.scenes.last()) {
        (Some(f), Some(last)) => {
            if *f != last.commitment {
                report.violation(
                    "final_commitment",
                    "differs from the last scene's commitment",
                );
            }
            check_commitment(&mut report, "final_commitment.score", f.score);
        }
        (Some(_), None) => {
            report.violation("final_commitment", "present but the trace has no scenes")
        }
        (None, Some(_)) => report.violation("final_commitment", "missing"),
        (None, None) => {}
    }
    if trace.terminated_early && trace.termination_reason.is_none() {
        report.violation("termination_reason", "early termination without a reason");
    }
    report
}
