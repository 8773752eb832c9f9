//! `olid`: experiment runner for offensive-language identification.
//!
//! Exit status: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical failure.

mod artifacts;
mod commands;
mod config;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use olid::textprep::Regime;

use commands::{evaluate, gradcheck, predict, preprocess, synth, train};
use exit::ConfigError;

#[derive(Debug, Parser)]
#[command(name = "olid", version, about = "Offensive language identification experiments")]
struct Cli {
    /// Override the root seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for ensemble members and forest trees. Results do not
    /// depend on this.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Directory for artifacts; overrides the configuration.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Overwrite an output directory produced by a different configuration.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Apply a preprocessing regime to a TSV file.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_parser = parse_regime)]
        regime: Regime,
        /// Classical regime: do not lowercase ASCII letters.
        #[arg(long)]
        keep_case: bool,
    },
    /// Train the configured model or recipe and report validation scores.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Score a saved model or ensemble directory on a labeled TSV file.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Tokenizer or bag-of-words vocabulary; found next to the model by
        /// default.
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Print JSON instead of the text table.
        #[arg(long)]
        json: bool,
    },
    /// Label an unlabeled TSV file.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
    /// Compare analytic and finite-difference encoder gradients.
    Gradcheck {
        /// Fail unless the maximum relative error is below this.
        #[arg(long, default_value_t = gradcheck::DEFAULT_TOLERANCE)]
        strict: f64,
    },
    /// Generate the synthetic two-language benchmark.
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn parse_regime(s: &str) -> std::result::Result<Regime, String> {
    s.parse().map_err(|e: olid::Error| e.to_string())
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads == 0 {
        anyhow::bail!(ConfigError("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| ConfigError(format!("cannot start thread pool: {e}")))?;
    match cli.command {
        Command::Preprocess {
            input,
            output,
            regime,
            keep_case,
        } => preprocess::run(&preprocess::PreprocessArgs {
            input,
            output,
            regime,
            keep_case,
        }),
        Command::Train { config } => train::run(&train::TrainArgs {
            config,
            seed: cli.seed,
            output_dir: cli.output_dir,
            force: cli.force,
        }),
        Command::Evaluate {
            model,
            data,
            vocab,
            json,
        } => evaluate::run(&evaluate::EvaluateArgs {
            model,
            data,
            vocab,
            output_dir: cli.output_dir,
            json,
        }),
        Command::Predict {
            model,
            input,
            output,
            vocab,
        } => predict::run(&predict::PredictArgs {
            model,
            input,
            output,
            vocab,
        }),
        Command::Gradcheck { strict } => gradcheck::run(cli.seed.unwrap_or(0), strict),
        Command::Synth { config } => synth::run(&synth::SynthArgs {
            config,
            seed: cli.seed,
            output_dir: cli.output_dir,
            force: cli.force,
        }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE } else { exit::OK });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::code_for(&e))
        }
    }
}
