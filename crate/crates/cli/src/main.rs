use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use roleplay_core::analytics::{
    compute_stats, read_records_lenient, render_stats_table, GroupBy, RecordWriter, StatsConfig, WHITESPACE,
};
use roleplay_core::domain::{load_goal_set, load_persona_set, FixtureSource};
use roleplay_core::engine::{run_batch, BatchError, RunManifest};
use roleplay_core::study::CollectionConfig;
use roleplay_core::{Dialogue, EngineConfig, StopToken, SubjectSpec, TemplateSet};
use roleplay_study::{Study, StudyConfig};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "roleplay", version, about = "Simulate persona-driven dialogues and analyse them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every persona x goal x seed cell and write one JSONL record per dialogue.
    Simulate(Simulate),
    /// Summarise a JSONL dialogue file as a statistics table.
    Stats(Stats),
    /// Run the study service for human collection and evaluation.
    Serve(Serve),
    /// Run a local chat-completion endpoint that echoes its input.
    EchoServer {
        #[arg(long, default_value = "127.0.0.1:8081")]
        addr: SocketAddr,
    },
}

#[derive(Args)]
struct Simulate {
    /// Persona set (TOML), or "bundled".
    #[arg(long, default_value = "bundled")]
    personas: String,
    /// Goal set (TOML), or "bundled".
    #[arg(long, default_value = "bundled")]
    goals: String,
    /// Inquirer subject spec (TOML).
    #[arg(long)]
    inquirer: PathBuf,
    /// Responder subject spec (TOML).
    #[arg(long)]
    responder: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = roleplay_core::engine::DEFAULT_MAX_TURNS)]
    max_turns: usize,
    /// Output JSONL; the manifest is written next to it.
    #[arg(long)]
    out: PathBuf,
    /// Template overrides (TOML) layered over the bundled families.
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    concurrency: usize,
    #[arg(long, default_value = "FINISH")]
    stop: String,
    /// Keep only the extracted prompt instead of the raw inquirer output.
    #[arg(long)]
    no_raw: bool,
}

#[derive(Args)]
struct Stats {
    #[arg(long = "in")]
    input: Vec<PathBuf>,
    #[arg(long, default_value = WHITESPACE)]
    tokenizer: String,
    #[arg(long, default_value = "model")]
    group_by: GroupBy,
    /// Also write the full report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value = "FINISH")]
    stop: String,
}

#[derive(Args)]
struct Serve {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Event log holding all study state.
    #[arg(long, default_value = "study-data/events.jsonl")]
    log: PathBuf,
    /// Responder subject spec (TOML) for collection sessions.
    #[arg(long)]
    responder: PathBuf,
    #[arg(long, default_value = "bundled")]
    goals: String,
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    allocation_seed: u64,
    #[arg(long, default_value_t = roleplay_study::DEFAULT_PAIRS)]
    pairs: usize,
    /// Skip the fsync after each logged event.
    #[arg(long)]
    no_sync: bool,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    let result = runtime.block_on(async {
        match cli.command {
            Command::Simulate(args) => simulate(args).await,
            Command::Stats(args) => stats(args),
            Command::Serve(args) => serve(args).await,
            Command::EchoServer { addr } => roleplay_study::serve_echo(addr).await.map(|()| ExitCode::SUCCESS).map_err(Into::into),
        }
    });
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(2)
    })
}

fn load_spec(path: &Path) -> Result<SubjectSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    SubjectSpec::from_toml(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

fn templates(path: Option<&Path>) -> Result<TemplateSet> {
    Ok(match path {
        Some(p) => TemplateSet::bundled_with_overrides(p)?,
        None => TemplateSet::bundled(),
    })
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn write_manifest(out: &Path, manifest: &RunManifest) -> Result<PathBuf> {
    let path = manifest_path(out);
    let json = serde_json::to_string_pretty(manifest)?;
    std::fs::write(&path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

async fn simulate(args: Simulate) -> Result<ExitCode> {
    if args.seeds.is_empty() {
        bail!("--seeds needs at least one value");
    }
    let inquirer = load_spec(&args.inquirer)?;
    let responder = load_spec(&args.responder)?;
    let personas = load_persona_set(&FixtureSource::from_arg(&args.personas))?;
    let goals = load_goal_set(&FixtureSource::from_arg(&args.goals))?;
    let mut cfg = EngineConfig::for_specs(&inquirer, &responder);
    cfg.max_turns = args.max_turns;
    cfg.stop = StopToken::new(args.stop)?;
    cfg.record_raw = !args.no_raw;
    cfg.templates = templates(args.templates.as_deref())?;

    let mut sink = RecordWriter::create(&args.out, "pending")?;
    let total = personas.len() * goals.len() * args.seeds.len();
    tracing::info!(personas = personas.len(), goals = goals.len(), seeds = args.seeds.len(), total, "starting grid");
    let result = run_batch(&inquirer, &responder, &personas, &goals, &args.seeds, &cfg, args.concurrency.max(1), &mut sink).await;
    let manifest = match result {
        Ok(m) => m,
        Err(BatchError::Sink { index, source, manifest }) => {
            let path = write_manifest(&args.out, &manifest)?;
            eprintln!("error: writing dialogue {index} failed: {source}; partial manifest at {}", path.display());
            return Ok(ExitCode::FAILURE);
        }
        Err(e) => return Err(e.into()),
    };
    let path = write_manifest(&args.out, &manifest)?;
    let outcomes: Vec<String> = manifest.outcomes.iter().map(|(k, v)| format!("{k:?}={v}")).collect();
    println!(
        "{}/{} dialogues written to {} ({}); manifest {}",
        manifest.produced,
        manifest.grid_size(),
        args.out.display(),
        outcomes.join(", "),
        path.display()
    );
    Ok(if manifest.is_complete() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn stats(args: Stats) -> Result<ExitCode> {
    if args.input.is_empty() {
        bail!("--in needs at least one file");
    }
    let mut dialogues: Vec<Dialogue> = Vec::new();
    for path in &args.input {
        let read = read_records_lenient(path)?;
        if let Some(e) = read.error {
            eprintln!("warning: {e}; using the {} records before it", read.records.len());
        }
        dialogues.extend(read.records.into_iter().map(|r| r.dialogue));
    }
    let cfg = StatsConfig { tokenizer_id: args.tokenizer, group_by: args.group_by, stop: StopToken::new(args.stop)? };
    let reports = compute_stats(&dialogues, &cfg)?;
    print!("{}", render_stats_table(&reports));
    if let Some(path) = args.report {
        let json = serde_json::to_string_pretty(&reports)?;
        std::fs::write(&path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

async fn serve(args: Serve) -> Result<ExitCode> {
    let responder = load_spec(&args.responder)?;
    let mut collection = CollectionConfig::new(responder);
    collection.templates = templates(args.templates.as_deref())?;
    let goals = load_goal_set(&FixtureSource::from_arg(&args.goals))?;
    let mut cfg = StudyConfig::new(collection, goals, args.log);
    cfg.allocation_seed = args.allocation_seed;
    cfg.default_pairs = args.pairs;
    cfg.sync = !args.no_sync;
    let study = Arc::new(Study::open(cfg)?);
    roleplay_study::serve(study, args.addr).await?;
    Ok(ExitCode::SUCCESS)
}
