//! `pkpredict`: end-to-end pharmacokinetic parameter prediction pipeline.
//!
//! Subcommands cover fingerprinting, diversity-aware dataset splitting,
//! bioactivity pretraining, multitask training, feature-layer transfer,
//! consensus construction, evaluation and prediction. All behaviour is
//! driven by a JSON configuration (`--emit-default-config` prints the
//! built-in defaults).

mod commands;
mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::PipelineConfig;
use pipeline::Ctx;

#[derive(Parser)]
#[command(
    name = "pkpredict",
    version,
    about = "Pharmacokinetic parameter prediction pipeline"
)]
struct Cli {
    /// JSON pipeline configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override every configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for checkpoints and reports (overrides the
    /// configured directories).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Maximum concurrently trained networks in `transfer`.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Print the built-in default configuration as JSON and exit.
    #[arg(long)]
    emit_default_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute ECFP fingerprints and write id,ecfp pairs.
    Fingerprint,
    /// Split the dataset 60:20:20 and report per-task subset errors.
    Split {
        /// Override the configured method (mdfiswd | random).
        #[arg(long)]
        method: Option<String>,
    },
    /// Train the bioactivity pretraining network.
    Pretrain,
    /// Train the multitask pharmacokinetic network.
    Train,
    /// Build task networks from the pretrained feature layers and retrain.
    Transfer,
    /// Select the best member per task on validation data.
    Consensus,
    /// Report accuracy and MAE per task over train/val/test.
    Evaluate {
        /// Evaluate a specific four-task checkpoint instead of the consensus.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Write denormalized per-molecule predictions.
    Predict {
        /// Predict with a specific four-task checkpoint instead of the
        /// consensus.
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if cli.emit_default_config {
        println!(
            "{}",
            serde_json::to_string_pretty(&PipelineConfig::default())?
        );
        return Ok(());
    }
    let Some(command) = cli.command else {
        anyhow::bail!("ConfigError: a subcommand is required (see --help)");
    };

    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.split.seed = seed;
        config.pretrain.seed = seed;
        config.multitask.seed = seed;
        config.transfer.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.paths.checkpoint_dir = out.clone();
        config.paths.report_dir = out.clone();
    }
    config.validate()?;
    let ctx = Ctx::new(config, cli.threads)?;

    match command {
        Command::Fingerprint => commands::fingerprint(&ctx),
        Command::Split { method } => {
            let method = method.as_deref().map(commands::parse_method).transpose()?;
            commands::split(&ctx, method)
        }
        Command::Pretrain => commands::pretrain(&ctx),
        Command::Train => commands::train_multitask(&ctx),
        Command::Transfer => commands::transfer(&ctx),
        Command::Consensus => commands::consensus(&ctx),
        Command::Evaluate { model } => commands::evaluate(&ctx, model.as_deref()),
        Command::Predict { model } => commands::predict(&ctx, model.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::FAILURE
        }
    }
}
