//! Batch runner: counting, determinism, failure isolation, resume, and the
//! in-flight bound.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde_json::json;

use relate_sim::domain::validate_trace;
use relate_sim::gateway::{Gateway, GatewayConfig, ScriptRule, ScriptedBackend};
use relate_sim::prompts::role;
use relate_sim::runner::{
    self, build_gateway, checkpoint_dir, run_batch, trace_path, BackendKind, RunConfig,
};
use relate_sim::scene::{checkpoint_path, generate_bank, Dyad, ScenarioBank, SimulationConfig};

fn config(out: &Path, scenes: u32, concurrency: usize) -> RunConfig {
    RunConfig {
        concurrency,
        simulation: SimulationConfig {
            num_scenes: scenes,
            ..SimulationConfig::default()
        },
        ..RunConfig::new(out, 5)
    }
}

fn dyads() -> Vec<Dyad> {
    vec![common::dyad("d1"), common::dyad("d2")]
}

fn bank() -> Arc<ScenarioBank> {
    Arc::new(generate_bank(4, 2))
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for d in dyads() {
        for run in 0..5 {
            let p = trace_path(dir, &d.dyad_id, run);
            if let Ok(bytes) = std::fs::read(&p) {
                out.insert(format!("{}/{run}", d.dyad_id), bytes);
            }
        }
    }
    out
}

#[tokio::test]
async fn two_dyads_five_runs_make_ten_identical_traces() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let gw = build_gateway(BackendKind::Mock, 5).unwrap();
    let r = run_batch(&gw, bank(), &dyads(), &config(a.path(), 3, 16))
        .await
        .unwrap();
    assert_eq!(r.traces.len(), 10);
    assert!(r.failures.is_empty(), "{:?}", r.failures);
    assert!(r.peak_in_flight <= 16);
    let order: Vec<(String, u32)> = r
        .traces
        .iter()
        .map(|t| (t.dyad_id.clone(), t.run_index))
        .collect();
    assert_eq!(order[0], ("d1".to_string(), 0));
    assert_eq!(order[9], ("d2".to_string(), 4));
    for t in &r.traces {
        assert!(validate_trace(t).is_valid());
        assert_eq!(
            runner::read_trace(&trace_path(a.path(), &t.dyad_id, t.run_index)).unwrap(),
            *t
        );
    }

    let gw = build_gateway(BackendKind::Mock, 5).unwrap();
    run_batch(&gw, bank(), &dyads(), &config(b.path(), 3, 16))
        .await
        .unwrap();
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert_eq!(fa.len(), 10);
    assert_eq!(fa, fb);
    // Runs differ from one another.
    assert_ne!(fa["d1/0"], fa["d1/1"]);
}

#[tokio::test]
async fn in_flight_runs_respect_the_limit() {
    let dir = tempfile::tempdir().unwrap();
    let gw = build_gateway(BackendKind::Mock, 5).unwrap();
    let r = run_batch(&gw, bank(), &dyads(), &config(dir.path(), 1, 2))
        .await
        .unwrap();
    assert_eq!(r.traces.len(), 10);
    assert!(
        r.peak_in_flight >= 1 && r.peak_in_flight <= 2,
        "{}",
        r.peak_in_flight
    );
}

#[tokio::test]
async fn bad_configs_and_empty_banks_fail_the_batch() {
    let dir = tempfile::tempdir().unwrap();
    let gw = build_gateway(BackendKind::Mock, 5).unwrap();
    let mut c = config(dir.path(), 1, 2);
    c.runs_per_dyad = 0;
    assert!(run_batch(&gw, bank(), &dyads(), &c).await.is_err());
    assert!(ScenarioBank::new(vec![]).is_err() || ScenarioBank::new(vec![]).unwrap().is_empty());
}

#[tokio::test]
async fn one_exhausted_script_fails_only_its_run() {
    let dir = tempfile::tempdir().unwrap();
    // Every rule repeats except scene expansion, which is scripted nine
    // times; whichever run comes tenth finds the script exhausted.
    let expansion = json!({
        "theme": "t", "setting": "s", "NPC": [], "current_scene": "c",
        "character_1_goal": "g1", "character_2_goal": "g2",
        "scene_conflict": "x", "stakes": "s", "third_party": null
    });
    let mut rules: Vec<ScriptRule> = common::loop_rules()
        .into_iter()
        .filter(|r| r.role_tag != role::SCENE_EXPANSION)
        .collect();
    for _ in 0..9 {
        rules.push(ScriptRule::json(role::SCENE_EXPANSION, expansion.clone()));
    }
    let gw = Gateway::new(
        Arc::new(ScriptedBackend::new(rules, 8)),
        GatewayConfig::default(),
    );
    let bank = Arc::new(common::one_per_category());
    let r = run_batch(&gw, bank.clone(), &dyads(), &config(dir.path(), 1, 4))
        .await
        .unwrap();
    assert_eq!(r.traces.len(), 10);
    assert_eq!(r.failures.len(), 1, "{:?}", r.failures);
    let bad: Vec<_> = r.traces.iter().filter(|t| t.error.is_some()).collect();
    assert_eq!(bad.len(), 1);
    assert!(!validate_trace(bad[0]).is_valid());
    assert_eq!(
        r.traces
            .iter()
            .filter(|t| validate_trace(t).is_valid())
            .count(),
        9
    );

    // A second pass redoes only the failed run.
    let gw = Gateway::new(
        Arc::new(ScriptedBackend::new(common::loop_rules(), 8)),
        GatewayConfig::default(),
    );
    let again = run_batch(&gw, bank, &dyads(), &config(dir.path(), 1, 4))
        .await
        .unwrap();
    assert_eq!(again.reused, 9);
    assert!(again.failures.is_empty());
}

#[tokio::test]
async fn interrupted_batches_resume_to_identical_traces() {
    let (full, cut) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let gw = build_gateway(BackendKind::Mock, 5).unwrap();
    run_batch(&gw, bank(), &dyads(), &config(full.path(), 4, 16))
        .await
        .unwrap();
    let gw = build_gateway(BackendKind::Mock, 5).unwrap();
    run_batch(&gw, bank(), &dyads(), &config(cut.path(), 4, 16))
        .await
        .unwrap();

    // Simulate a crash: two runs lost their trace file, one of them mid-run
    // (only the first two scene checkpoints survived), the other before it
    // started.
    std::fs::remove_file(trace_path(cut.path(), "d1", 2)).unwrap();
    for scene in [2, 3] {
        let p = checkpoint_path(&checkpoint_dir(cut.path(), "d1", 2), scene);
        if p.exists() {
            std::fs::remove_file(p).unwrap();
        }
    }
    std::fs::remove_file(trace_path(cut.path(), "d2", 4)).unwrap();
    std::fs::remove_dir_all(checkpoint_dir(cut.path(), "d2", 4)).unwrap();

    let gw = build_gateway(BackendKind::Mock, 5).unwrap();
    let r = run_batch(&gw, bank(), &dyads(), &config(cut.path(), 4, 16))
        .await
        .unwrap();
    assert_eq!(r.reused, 8);
    assert_eq!(files(cut.path()), files(full.path()));
}

#[tokio::test]
async fn dyad_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("dyads.jsonl");
    runner::write_dyads(&p, &dyads()).unwrap();
    assert_eq!(runner::read_dyads(&p).unwrap(), dyads());
}
