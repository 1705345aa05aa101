//! `ards`: the end-to-end pipeline around the resampling attack — synthesize
//! data, generate label-preserving augmented corpora, train the embedding
//! classifier (singly or as the 2+2 ensemble), attack it, and score it.
//!
//! Exit codes: 0 success, 1 runtime/I-O failure, 2 usage/config error.

mod cmds;
mod common;
mod manifest;

use clap::{Parser, Subcommand};

use common::Failure;

#[derive(Parser)]
#[command(name = "ards", version, about, max_term_width = 100)]
struct Cli {
    /// Worker threads (default: ARDS_WORKERS env var, then all cores).
    /// Outputs do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic two-class 87-feature dataset.
    Synth(cmds::synth::SynthArgs),
    /// Generate label-preserving resampled variants of a dataset.
    Gen(cmds::gen::GenArgs),
    /// Train one classifier.
    Train(cmds::train::TrainArgs),
    /// Train an ensemble (the 2+2 grid by default).
    TrainEnsemble(cmds::train::TrainEnsembleArgs),
    /// Build an adversarial set against a trained model or ensemble.
    Attack(cmds::attack::AttackArgs),
    /// Score clean/adversarial accuracy and the mixed score.
    Eval(cmds::eval::EvalArgs),
}

fn init_workers(flag: Option<usize>) -> Result<(), Failure> {
    let from_env = std::env::var("ARDS_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    if let Some(n) = flag.or(from_env) {
        if n == 0 {
            return Err(common::usage("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(e.into()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    init_workers(cli.workers)?;
    match cli.command {
        Command::Synth(args) => cmds::synth::run(args),
        Command::Gen(args) => cmds::gen::run(args),
        Command::Train(args) => cmds::train::run(args),
        Command::TrainEnsemble(args) => cmds::train::run_ensemble(args),
        Command::Attack(args) => cmds::attack::run(args),
        Command::Eval(args) => cmds::eval::run(args),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(failure) => {
            eprintln!("error: {:#}", failure.message());
            std::process::exit(failure.code());
        }
    }
}
