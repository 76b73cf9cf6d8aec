//! `vmusprod`: annotate MIDI corpora, tokenize them, train the generation
//! stages, generate music from video features, and evaluate the results.

mod commands;
mod config;
mod manifest;
mod provenance;
mod util;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

/// Exit codes: 0 success, 1 usage, 2 data error, 3 internal.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(anyhow::Error),
    Internal(anyhow::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

pub type CliResult = Result<(), CliError>;

/// Anything wrong with user-provided files or values is a data error.
pub fn data_err(err: impl Into<anyhow::Error>) -> CliError {
    CliError::Data(err.into())
}

pub fn internal_err(err: impl Into<anyhow::Error>) -> CliError {
    CliError::Internal(err.into())
}

#[derive(Parser)]
#[command(name = "vmusprod", version, about = "Video-conditioned symbolic music pipeline")]
struct Cli {
    /// TOML config file; defaults to $VMUSPROD_CONFIG when set.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive melody/accompaniment splits, chords, and tonality per piece.
    Annotate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Encode every piece into per-stage token caches.
    Tokenize {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train one stage (or the retrieval encoders) on a tokenized corpus.
    Train {
        #[arg(long, value_enum)]
        stage: commands::train::StageArg,
        /// Tokenized corpus manifest written by `tokenize`.
        #[arg(long)]
        tokenized: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Drop the chord stage's cross-attention (unconditional mode).
        #[arg(long)]
        unconditional: bool,
    },
    /// Generate music for a generation manifest.
    Generate {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory holding `<stage>.ckpt` checkpoints; individual paths in
        /// the manifest win.
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Objective evaluation.
    Evaluate {
        #[command(subcommand)]
        what: commands::evaluate::EvaluateCmd,
    },
    /// Corpus statistics: chord tables, transitions, tempo histograms.
    Analyze {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult {
    let config = RunConfig::load(cli.config.as_deref()).map_err(data_err)?;
    match cli.command {
        Command::Annotate { manifest, out_dir } => {
            commands::annotate::run(&manifest, &out_dir, &config)
        }
        Command::Tokenize { manifest, out_dir } => {
            commands::tokenize::run(&manifest, &out_dir, &config)
        }
        Command::Train { stage, tokenized, out_dir, epochs, lr, seed, unconditional } => {
            let overrides = commands::train::Overrides { epochs, lr, seed, unconditional };
            commands::train::run(stage, &tokenized, &out_dir, &config, &overrides)
        }
        Command::Generate { manifest, models } => {
            commands::generate::run(&manifest, models.as_deref(), &config)
        }
        Command::Evaluate { what } => commands::evaluate::run(what, &config),
        Command::Analyze { manifest, out_dir } => {
            commands::analyze::run(&manifest, &out_dir, &config)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are not usage errors.
            let benign = matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = err.print();
            return if benign { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            match &err {
                CliError::Usage(msg) => eprintln!("usage error: {msg}"),
                CliError::Data(e) => eprintln!("data error: {e:#}"),
                CliError::Internal(e) => eprintln!("internal error: {e:#}"),
            }
            ExitCode::from(err.code())
        }
    }
}
