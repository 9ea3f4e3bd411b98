//! `todsim`: simulate dialogues, augment DST turns, and inspect corpora.
//!
//! Exit codes: 0 success, 1 validation violations, 2 configuration or usage
//! error, 3 backend failure, 4 no dialogue produced.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("{0} violation(s) found")]
    Violations(usize),
    #[error("no dialogue was produced: {0}")]
    Empty(String),
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Violations(_) => 1,
            CliError::Config(_) | CliError::Output { .. } => 2,
            CliError::Backend(_) => 3,
            CliError::Empty(_) => 4,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "todsim", version, about = "Synthetic task-oriented dialogue generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate full dialogues from generated user goals.
    Simulate(SimulateArgs),
    /// Generate alternative user turns for DST training.
    AugmentDst(AugmentArgs),
    /// Print corpus statistics.
    Stats(InspectArgs),
    /// Re-check a corpus against the ontology, the match filter and the act rules.
    Validate(InspectArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Live,
    Replay,
    Mock,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MockKind {
    GoalFollower,
    NeverBye,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AuxKind {
    Lexical,
    None,
    External,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StrategyName {
    Random,
    Substitution,
    Combination,
}

/// Flags shared by every command. Unset flags fall back to `--config`,
/// then to built-in defaults.
#[derive(Args, Debug, Default, Clone)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub ontology: Option<PathBuf>,
    /// Seed corpus JSON.
    #[arg(long, global = true)]
    pub seeds: Option<PathBuf>,
    /// Directory of `<domain>_db.json` tables.
    #[arg(long, global = true)]
    pub db_dir: Option<PathBuf>,
    /// Reject database constraints on unknown attributes.
    #[arg(long, global = true)]
    pub strict_db: bool,
    #[arg(long, value_enum, global = true)]
    pub backend: Option<BackendKind>,
    /// Transcript read by the replay backend.
    #[arg(long, global = true)]
    pub transcript: Option<PathBuf>,
    /// Append every completion to this transcript.
    #[arg(long, global = true)]
    pub record: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub mock_mode: Option<MockKind>,
    /// Completion endpoint for the live backend.
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[arg(long, value_enum, global = true)]
    pub aux: Option<AuxKind>,
    /// Command for `--aux external` over stdin/stdout.
    #[arg(long, global = true)]
    pub aux_command: Option<String>,
    /// URL for `--aux external` over HTTP.
    #[arg(long, global = true)]
    pub aux_url: Option<String>,
    /// Worker threads; 0 uses the backend's concurrency limit.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_turns: Option<u64>,
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_shots: Option<u64>,
    #[arg(long, global = true)]
    pub retries: Option<u32>,
    /// `sampling` or `nucleus`.
    #[arg(long, global = true)]
    pub decode_preset: Option<String>,
    /// Machine-readable output on stdout.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of dialogues.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub num: u64,
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyName>,
    /// Output corpus JSON.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Per-turn revision trace as JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Batch report JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AugmentArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Augmented samples per seed turn.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub passes: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Corpus JSON to inspect.
    pub corpus: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::AugmentDst(a) => commands::augment_dst(&a),
        Command::Stats(a) => commands::stats(&a),
        Command::Validate(a) => commands::validate(&a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
