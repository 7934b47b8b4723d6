//! `rankfuse`: fuse ranked prediction lists from multiple models.
//!
//! Subcommands cover the full pipeline: `synth` (seeded synthetic data),
//! `fit` (learn fusion weights), `baseline` (hand-designed weights),
//! `merge`, `eval`, `simfilter` (near-duplicate removal by count-Tanimoto
//! similarity), `tokenize` (SMILES), and `elo` (Bradley-Terry ratings from
//! pairwise judgments).
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical or
//! degeneracy error. Every file-producing subcommand writes a manifest next
//! to its output recording the resolved configuration, input digests and
//! seed; reruns with an identical manifest produce byte-identical outputs.

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod manifest;

use commands::{baseline, elo, eval, fit, merge, simfilter, synth, tokenize};

#[derive(Parser)]
#[command(name = "rankfuse", version, about = "Fuse ranked prediction lists from multiple models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic multi-model dataset.
    Synth(synth::Args),
    /// Learn fusion weights on a validation dataset.
    Fit(fit::Args),
    /// Write a hand-designed weight matrix.
    Baseline(baseline::Args),
    /// Merge per-model prediction lists under a weight matrix.
    Merge(merge::Args),
    /// Score merged rankings against ground truths.
    Eval(eval::Args),
    /// Drop queries too similar to any reference fingerprint.
    Simfilter(simfilter::Args),
    /// Tokenize SMILES lines from stdin to space-joined tokens on stdout.
    Tokenize(tokenize::Args),
    /// Fit Bradley-Terry ratings from pairwise comparisons.
    Elo(elo::Args),
}

fn exit_code(err: &rankfuse::Error) -> u8 {
    use rankfuse::Error;
    match err {
        Error::InvalidArgument(_) => 2,
        Error::ModelMismatch(_) | Error::Data(_) | Error::Tokenize { .. } | Error::Io(_) => 3,
        Error::Degenerate(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => synth::run(args),
        Command::Fit(args) => fit::run(args),
        Command::Baseline(args) => baseline::run(args),
        Command::Merge(args) => merge::run(args),
        Command::Eval(args) => eval::run(args),
        Command::Simfilter(args) => simfilter::run(args),
        Command::Tokenize(args) => tokenize::run(args),
        Command::Elo(args) => elo::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
