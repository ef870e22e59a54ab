//! `andt`: synthesize data, train, evaluate and self-check the anomaly detector.

mod config;
mod eval;
mod failure;
mod gradcheck;
mod synth;
mod train;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "andt", version, about = "Video anomaly detection by future-frame prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic moving-dot dataset with reversed-motion anomalies.
    Synth(synth::SynthArgs),
    /// Train on the normal videos of a dataset.
    Train(train::TrainArgs),
    /// Score test videos and write metrics, plots and features.
    Eval(eval::EvalArgs),
    /// Compare every backward rule and the full model with finite differences.
    Gradcheck(gradcheck::GradcheckArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(a) => synth::run(a),
        Command::Train(a) => train::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Gradcheck(a) => gradcheck::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
