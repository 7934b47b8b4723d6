use std::path::PathBuf;

use clap::Parser;
use serde::Serialize;

use rankfuse::io::{
    group_to_outputs, read_theta, JsonlReader, JsonlWriter, MergedRecord, PredictionGroups,
    PredictionRecord,
};
use rankfuse::ranklist::merge_outputs;
use rankfuse::Result;

use crate::manifest::{ensure_parent, RunManifest};

#[derive(Parser)]
pub struct Args {
    /// Predictions JSONL, grouped by input.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Theta checkpoint JSON.
    #[arg(long)]
    pub theta: PathBuf,
    /// Maximum merged candidates per input.
    #[arg(long, default_value_t = 50)]
    pub limit: usize,
    /// Output JSONL of merged rankings.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct ResolvedConfig {
    limit: usize,
    k_max: usize,
}

pub fn run(args: Args) -> Result<()> {
    let theta = read_theta(&args.theta)?;
    ensure_parent(&args.out)?;
    let mut writer = JsonlWriter::create(&args.out)?;
    let mut n = 0usize;

    // One group in memory at a time; output order follows input order.
    for group in PredictionGroups::new(JsonlReader::<PredictionRecord>::open(&args.predictions)?) {
        let (input_id, group) = group?;
        let outputs = group_to_outputs(&input_id, group, None)?;
        let merged = merge_outputs(&outputs, &theta, args.limit)?;
        let (ranked, scores): (Vec<String>, Vec<f64>) =
            merged.into_iter().map(|(k, s)| (k.as_str().to_owned(), s)).unzip();
        writer.write(&MergedRecord { input_id, ranked, scores })?;
        n += 1;
    }
    writer.finish()?;

    RunManifest::new("merge")
        .config(&ResolvedConfig { limit: args.limit, k_max: theta.k_max() })?
        .input("predictions", &args.predictions)?
        .input("theta", &args.theta)?
        .output(&args.out)
        .write_beside(&args.out)?;

    eprintln!("merged {n} inputs into {}", args.out.display());
    Ok(())
}
