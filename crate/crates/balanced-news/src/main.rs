use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use balanced_news::ingestion::{self, synthetic_pools};
use balanced_news::service;
use balanced_news::session::{EventSink, FileEventLog, MemoryEventLog, SessionConfig};
use balanced_news::simulator::{self, emit, HttpDriver, OutputFormat, Scenario};
use balanced_news::store::SessionStore;
use balanced_news_core::Pools;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "balanced-news", version, about = "Unfiltered and balanced news feeds side by side")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service (and serve the UI bundle, if present).
    Serve(ServeArgs),
    /// Drive a scripted user through a scenario and write the trajectory.
    Simulate(SimulateArgs),
    /// Load and classify a corpus, then print the ingestion summary.
    Ingest(IngestArgs),
}

#[derive(Args)]
struct CorpusArgs {
    /// Line-delimited JSON corpus. Without it a synthetic corpus is used.
    #[arg(long, requires = "bias_map")]
    corpus: Option<PathBuf>,
    /// CSV mapping `source_domain,type_name`.
    #[arg(long, requires = "corpus")]
    bias_map: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "BALANCED_HOST", default_value = "127.0.0.1")]
    host: String,
    #[arg(long, env = "BALANCED_PORT", default_value_t = 8080)]
    port: u16,
    #[command(flatten)]
    corpus: CorpusArgs,
    /// TOML file with session defaults (page_size, eta, gamma, lower_liberal, upper_liberal).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Append-only event log; existing sessions in it are restored on start.
    #[arg(long)]
    event_log: Option<PathBuf>,
    /// fsync the event log after every append.
    #[arg(long)]
    fsync: bool,
    /// Directory holding the built UI bundle, served under `/`.
    #[arg(long, default_value = "web/dist")]
    static_dir: PathBuf,
    /// Articles per type in the synthetic corpus.
    #[arg(long, default_value_t = 5000)]
    synthetic_per_type: usize,
}

#[derive(Args)]
struct SimulateArgs {
    /// Preset name (fig3, no-preference) or path to a scenario TOML file.
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Overrides the scenario's iteration count.
    #[arg(long)]
    iterations: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    /// Drive a running service at this base URL instead of the in-process session layer.
    #[arg(long)]
    via_http: Option<String>,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    bias_map: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn load_config(path: Option<&PathBuf>) -> Result<SessionConfig> {
    let Some(path) = path else {
        return Ok(SessionConfig::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config: SessionConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    config.validate()?;
    Ok(config)
}

fn load_pools(args: &CorpusArgs, config: &SessionConfig, synthetic_per_type: usize) -> Result<Pools> {
    let labels = config.labels()?;
    match (&args.corpus, &args.bias_map) {
        (Some(corpus), Some(map)) => {
            let ingested = ingestion::ingest(corpus, map, &labels)?;
            for warning in &ingested.malformed {
                tracing::warn!("{}: skipped {warning}", corpus.display());
            }
            tracing::info!("{}", ingested.summary);
            Ok(ingested.pools)
        }
        _ => {
            tracing::info!(synthetic_per_type, "no corpus given, using the synthetic corpus");
            Ok(synthetic_pools(&labels, synthetic_per_type))
        }
    }
}

async fn serve(args: ServeArgs) -> Result<()> {
    let config = load_config(args.config.as_ref())?;
    let pools = Arc::new(load_pools(&args.corpus, &config, args.synthetic_per_type)?);
    let store = match &args.event_log {
        Some(path) => {
            let events = FileEventLog::read_all(path)?;
            let sink: Box<dyn EventSink + Send> = Box::new(FileEventLog::open(path, args.fsync)?);
            let store = SessionStore::recover(pools, config, sink, &events)?;
            tracing::info!(sessions = store.len(), log = %path.display(), "event log loaded");
            store
        }
        None => SessionStore::new(pools, config, Box::new(MemoryEventLog::new())),
    };
    let static_dir = args.static_dir.is_dir().then_some(args.static_dir);
    let app = service::router(Arc::new(store), static_dir);
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .with_context(|| format!("bad listen address {}:{}", args.host, args.port))?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut scenario = Scenario::load(&args.scenario)?;
    if let Some(iterations) = args.iterations {
        scenario.iterations = iterations;
    }
    scenario.validate()?;
    let result = match &args.via_http {
        Some(url) => simulator::run_with(&scenario, args.seed, &mut HttpDriver::new(url))?,
        None => {
            let pools = scenario.pools()?;
            simulator::run_scenario(&scenario, args.seed, &pools)?
        }
    };
    emit(&result, &args.out, args.format)?;
    println!("{}", result.summary);
    Ok(())
}

fn ingest(args: IngestArgs) -> Result<()> {
    let config = load_config(args.config.as_ref())?;
    let ingested = ingestion::ingest(&args.corpus, &args.bias_map, &config.labels()?)?;
    for warning in &ingested.malformed {
        eprintln!("warning: {}: skipped {warning}", args.corpus.display());
    }
    for (domain, count) in &ingested.unmapped {
        eprintln!("warning: unmapped domain {domain} ({count} records)");
    }
    println!("{}", ingested.summary);
    let s = ingested.summary;
    if s.loaded != s.classified + s.skipped_unmapped + s.skipped_malformed {
        bail!("ingestion counts do not add up: {s}");
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Serve(args) => tokio::runtime::Runtime::new()
            .context("starting the runtime")
            .and_then(|rt| rt.block_on(serve(args))),
        Command::Simulate(args) => simulate(args),
        Command::Ingest(args) => ingest(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
