//! `lmastar`: drives graph generation, landmark preprocessing, compressor
//! training, matched-memory benchmarks, drift diagnostics, audits and
//! statistics from flags or a plain-text manifest.

mod commands;
mod error;
mod manifest;
mod provenance;
mod source;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use landmark_astar::bench::{Method, QueryMode};

use commands::Context;
use error::CliError;
use manifest::{Manifest, Settings};

#[derive(Debug, Parser)]
#[command(name = "lmastar", version, about = "Landmark heuristics for exact A* under a memory budget")]
struct Cli {
    /// `key = value` manifest; flags take precedence over it.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Directory for cached landmark label tables.
    #[arg(long, global = true, env = "LMASTAR_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate or convert a graph.
    Gen(GenArgs),
    /// Select an FPS landmark pool and compute its labels.
    Labels(LabelsArgs),
    /// Train a landmark compressor on an FPS teacher pool.
    Train(TrainArgs),
    /// Benchmark methods at matched bytes per vertex.
    Bench(BenchArgs),
    /// Compare AAC checkpoints against FPS-ALT and forced-first-m.
    Drift(DriftArgs),
    /// Check one method for admissibility violations and suboptimal paths.
    Audit(AuditArgs),
    /// Paired tests across seeds from a bench CSV.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// `sbm:BxS[:p_in:p_out]`, `ba:NxM`, `path:N`, or a `.gr` / edge-list file.
    #[arg(long)]
    pub graph: Option<String>,
    /// Generator seed.
    #[arg(long)]
    pub graph_seed: Option<u64>,
    /// Read an edge-list file as directed.
    #[arg(long)]
    pub directed: bool,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub out: Option<String>,
    /// `gr` or `edges`; defaults from the output extension.
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Debug, Args)]
pub struct LabelsArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Pool size.
    #[arg(long)]
    pub k: Option<usize>,
    /// FPS start vertex (default: lowest id of the largest component).
    #[arg(long)]
    pub start: Option<usize>,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub k0: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Epochs at which to save a checkpoint.
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Option<Vec<usize>>,
    /// `block_sparse` or `identity_first_m`.
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub pairs_per_epoch: Option<usize>,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Bytes per vertex.
    #[arg(long, value_delimiter = ',')]
    pub budgets: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Queries per seed.
    #[arg(long)]
    pub queries: Option<usize>,
    /// `uniform`, `hotspot` or `powerlaw`.
    #[arg(long)]
    pub mode: Option<QueryMode>,
    /// Training epochs for learned methods.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args)]
pub struct DriftArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub k0: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    /// Checkpoint epochs.
    #[arg(long, value_delimiter = ',')]
    pub epochs: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub queries: Option<usize>,
    /// Initializations to train, e.g. `block_sparse,identity_first_m`.
    #[arg(long, value_delimiter = ',')]
    pub inits: Option<Vec<String>>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Audit the summary rows of an existing bench CSV instead of running.
    #[arg(long, conflicts_with_all = ["graph", "method", "budget"])]
    pub input: Option<String>,
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub queries: Option<usize>,
    #[arg(long)]
    pub mode: Option<QueryMode>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Per-query audit CSV.
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Bench cell CSV.
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long)]
    pub baseline: Option<Method>,
    /// BH false discovery rate.
    #[arg(long)]
    pub q: Option<f64>,
    /// TOST equivalence margin in percentage points of reduction.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub out: Option<String>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let manifest = match &cli.manifest {
        Some(path) => Manifest::load(path)?,
        None => Manifest::default(),
    };
    let section = match &cli.command {
        Command::Gen(_) => "gen",
        Command::Labels(_) => "labels",
        Command::Train(_) => "train",
        Command::Bench(_) => "bench",
        Command::Drift(_) => "drift",
        Command::Audit(_) => "audit",
        Command::Stats(_) => "stats",
    };
    let ctx = Context {
        settings: Settings::new(manifest, section),
        cache_dir: cli.cache_dir.clone(),
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::invalid("jobs", 0, "must be at least 1"));
        }
        builder = builder.num_threads(jobs);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::invalid("jobs", cli.jobs.unwrap_or(0), e))?;
    pool.install(|| match &cli.command {
        Command::Gen(a) => commands::cmd_gen(ctx, a),
        Command::Labels(a) => commands::cmd_labels(ctx, a),
        Command::Train(a) => commands::cmd_train(ctx, a),
        Command::Bench(a) => commands::cmd_bench(ctx, a),
        Command::Drift(a) => commands::cmd_drift(ctx, a),
        Command::Audit(a) => commands::cmd_audit(ctx, a),
        Command::Stats(a) => commands::cmd_stats(ctx, a),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
