//! `rankspec` command-line frontend: rank analysis, degradation synthesis,
//! batch generation, metric evaluation and filterbank export.

mod cmd_batchgen;
mod cmd_degrade;
mod cmd_metrics;
mod cmd_rank;
mod common;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "rankspec",
    version,
    about = "Spectral-rank analysis and speech degradation toolkit",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank-difference statistics over a corpus (denoising and vocoding degradations)
    RankAnalyze(cmd_rank::RankAnalyzeArgs),
    /// Degrade single clips: additive noise or mel compression + proxy phase
    Degrade(cmd_degrade::DegradeArgs),
    /// Generate deterministic joint denoising/vocoding batch files
    Batchgen(cmd_batchgen::BatchgenArgs),
    /// MCD / LSD / SI-SNR over paired file lists
    Metrics(cmd_metrics::MetricsArgs),
    /// Export a mel filterbank and its pseudo-inverse to a tensor file
    Filterbank(common::FilterbankArgs),
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::RankAnalyze(args) => cmd_rank::run(args),
        Command::Degrade(args) => cmd_degrade::run(args),
        Command::Batchgen(args) => cmd_batchgen::run(args),
        Command::Metrics(args) => cmd_metrics::run(args),
        Command::Filterbank(args) => common::run_filterbank_export(args),
    }
}
