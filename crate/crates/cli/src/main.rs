//! Command-line entry point: persona synthesis, batch simulation,
//! evaluation, the rehearsal session service, and synthetic data
//! generation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use relate_sim::eval::{self, DyadOutcome};
use relate_sim::persona::{self, synthetic};
use relate_sim::runner::{self, BackendKind, RunConfig};
use relate_sim::scene::{generate_bank, ScenarioBank, SimulationConfig};
use relate_sim::server::{self, AppState};

#[derive(Parser)]
#[command(
    name = "relate-sim",
    version,
    about = "Relationship turning-point simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize personas from per-subject instrument directories.
    Persona {
        /// Directory holding one sub-directory of instrument JSON files per subject.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "mock")]
        backend: BackendKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the scene simulation for every dyad.
    Simulate {
        #[arg(long)]
        dyads: PathBuf,
        #[arg(long)]
        bank: PathBuf,
        #[arg(long, default_value_t = 5)]
        runs: u32,
        #[arg(long, default_value_t = 16)]
        concurrency: usize,
        #[arg(long, default_value_t = 8)]
        scenes: u32,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value = "mock")]
        backend: BackendKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score end-state predictions and commitment shifts against outcomes.
    Evaluate {
        #[arg(long)]
        traces: PathBuf,
        /// JSONL of {dyad_id, baseline, followup}.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value = "mock")]
        backend: BackendKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Serve the interactive rehearsal session API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        bank: PathBuf,
        #[arg(long, default_value = "mock")]
        backend: BackendKind,
        #[arg(long, default_value_t = 8)]
        scenes: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a generated scenario bank.
    Genbank {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        per_category: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a synthetic cohort: instrument directories and outcomes.
    Gendyads {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 71)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[tokio::main]
async fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Persona {
            input,
            out,
            backend,
            seed,
        } => persona_cmd(&input, &out, backend, seed).await,
        Command::Simulate {
            dyads,
            bank,
            runs,
            concurrency,
            scenes,
            k,
            lambda,
            backend,
            seed,
            out,
        } => {
            let mut simulation = SimulationConfig {
                num_scenes: scenes,
                ..SimulationConfig::default()
            };
            if let Some(k) = k {
                simulation.k = k;
            }
            if let Some(l) = lambda {
                simulation.lambda = l;
            }
            let config = RunConfig {
                runs_per_dyad: runs,
                concurrency,
                simulation,
                backend,
                seed,
                output_dir: out,
            };
            simulate_cmd(&dyads, &bank, config).await
        }
        Command::Evaluate {
            traces,
            truth,
            report,
            backend,
            seed,
        } => evaluate_cmd(&traces, &truth, &report, backend, seed).await,
        Command::Serve {
            port,
            bank,
            backend,
            scenes,
            seed,
        } => {
            let bank = ScenarioBank::load(&bank)?;
            let gateway = runner::build_gateway(backend, seed)?;
            let simulation = SimulationConfig {
                num_scenes: scenes,
                ..SimulationConfig::default()
            };
            let state = Arc::new(AppState::new(gateway, Arc::new(bank), simulation, seed));
            let listener = tokio::net::TcpListener::bind(("0.0.0.0", port))
                .await
                .with_context(|| format!("binding port {port}"))?;
            eprintln!("listening on {}", listener.local_addr()?);
            server::serve(listener, state).await?;
            Ok(())
        }
        Command::Genbank {
            out,
            per_category,
            seed,
        } => {
            if per_category == 0 {
                bail!("--per-category must be at least 1");
            }
            let bank = generate_bank(per_category, seed);
            write_file(&out, &bank.to_jsonl())?;
            println!("wrote {} scenarios to {}", bank.len(), out.display());
            Ok(())
        }
        Command::Gendyads { out, count, seed } => gendyads_cmd(&out, count, seed),
    }
}

async fn persona_cmd(input: &Path, out: &Path, backend: BackendKind, seed: u64) -> Result<()> {
    let subjects = persona::load_instrument_dir(input)?;
    if subjects.is_empty() {
        bail!(
            "no subject directories with instruments under {}",
            input.display()
        );
    }
    let gateway = runner::build_gateway(backend, seed)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut personas = BTreeMap::new();
    let mut failed = 0;
    for (id, result) in persona::synthesize_all(&gateway, subjects, Some(seed)).await {
        match result {
            Ok(p) => {
                persona::write_persona(&out.join(format!("{id}.json")), &p)?;
                personas.insert(id, p);
            }
            Err(e) => {
                failed += 1;
                eprintln!("{id}: {e}");
            }
        }
    }
    let (dyads, unpaired) = runner::pair_subjects(&personas);
    for id in &unpaired {
        eprintln!("{id}: no partner persona; left out of dyads.jsonl");
    }
    runner::write_dyads(&out.join("dyads.jsonl"), &dyads)?;
    println!(
        "{} personas written, {} failed, {} dyads in {}",
        personas.len(),
        failed,
        dyads.len(),
        out.join("dyads.jsonl").display()
    );
    if failed > 0 {
        bail!("{failed} persona(s) failed");
    }
    Ok(())
}

async fn simulate_cmd(dyads: &Path, bank: &Path, config: RunConfig) -> Result<()> {
    let dyads = runner::read_dyads(dyads)?;
    let bank = Arc::new(ScenarioBank::load(bank)?);
    let gateway = runner::build_gateway(config.backend, config.seed)?;
    let started = std::time::Instant::now();
    let result = runner::run_batch(&gateway, bank, &dyads, &config).await?;
    let calls: u64 = result
        .traces
        .iter()
        .flat_map(|t| &t.scenes)
        .map(|s| u64::from(s.llm_call_count))
        .sum();
    for f in &result.failures {
        eprintln!("{} run {}: {}", f.dyad_id, f.run_index, f.error);
    }
    println!(
        "{} traces ({} reused, {} failed) in {:.1}s; peak {} runs in flight; {} scene-level model calls",
        result.traces.len(),
        result.reused,
        result.failures.len(),
        started.elapsed().as_secs_f64(),
        result.peak_in_flight,
        calls,
    );
    Ok(())
}

async fn evaluate_cmd(
    traces: &Path,
    truth: &Path,
    report: &Path,
    backend: BackendKind,
    seed: u64,
) -> Result<()> {
    let traces = runner::load_traces(traces)?;
    let text =
        std::fs::read_to_string(truth).with_context(|| format!("reading {}", truth.display()))?;
    let outcomes: Vec<DyadOutcome> = eval::parse_truth(&text)?;
    let gateway = runner::build_gateway(backend, seed)?;
    let result = eval::evaluate(&gateway, &outcomes, &traces, Some(seed)).await?;
    for id in &result.skipped {
        eprintln!("{id}: no traces; skipped");
    }
    write_file(report, &(serde_json::to_string_pretty(&result)? + "\n"))?;
    print!("{}", eval::render_table(&result));
    println!("report written to {}", report.display());
    Ok(())
}

fn gendyads_cmd(out: &Path, count: usize, seed: u64) -> Result<()> {
    if count == 0 {
        bail!("--count must be at least 1");
    }
    let cohort = synthetic::generate_dyads(count, seed);
    let instruments = out.join("instruments");
    let mut outcomes = Vec::with_capacity(cohort.len());
    for d in &cohort {
        persona::write_instrument_docs(&instruments, &d.partner_a.docs)?;
        persona::write_instrument_docs(&instruments, &d.partner_b.docs)?;
        outcomes.push(d.outcome.clone());
    }
    write_file(&out.join("truth.jsonl"), &eval::truth_to_jsonl(&outcomes))?;
    println!(
        "wrote {} dyads: instruments in {}, outcomes in {}",
        cohort.len(),
        instruments.display(),
        out.join("truth.jsonl").display()
    );
    Ok(())
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}
