//! `egoground`: synthesize pointing fixtures, validate datasets, run and
//! score grounding tasks, render overlays.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::RunArgs;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or settings; nothing was run.
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Schema(#[from] egoground::schema::SchemaError),
    #[error(transparent)]
    Synth(#[from] egoground::synth::SynthError),
    #[error(transparent)]
    Eval(#[from] egoground::eval::EvalError),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Synth(egoground::synth::SynthError::EmptyFixtureSet) => 2,
            CliError::Synth(egoground::synth::SynthError::InvalidConfig(_)) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "egoground", version, about = "Deictic grounding toolkit for egocentric pointing scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic fixture set with a ground-truth sidecar
    Synth(SynthArgs),
    /// Check a dataset document and report issues and per-task case counts
    Validate {
        path: PathBuf,
    },
    /// Evaluate one task (or all) and write metadata, records and a report
    Run(RunArgs),
    /// Recompute the report of a run directory from its records
    Score {
        /// Run directory, or an output root holding one directory per task
        dir: PathBuf,
    },
    /// Draw overlays and paired prompt/output files for a run directory
    Render {
        dir: PathBuf,
        /// Dataset to resolve samples from (defaults to the run's data path)
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        image_root: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// TOML scene config; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dataset path; the sidecar is written next to it with a `.gt` extension
    #[arg(long, default_value = "fixtures/synth.json")]
    pub out: PathBuf,
    #[arg(long)]
    pub width: Option<u32>,
    #[arg(long)]
    pub height: Option<u32>,
    #[arg(long)]
    pub mean_candidates: Option<f64>,
    #[arg(long)]
    pub same_category_rate: Option<f64>,
    #[arg(long)]
    pub negative_rate: Option<f64>,
    /// Standard deviation of the direction noise, radians
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub occlusion_rate: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Validate { path } => commands::validate(&path),
        Command::Run(a) => commands::run(&a),
        Command::Score { dir } => commands::score(&dir),
        Command::Render {
            dir,
            data,
            image_root,
        } => commands::render(&dir, data.as_deref(), image_root.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
