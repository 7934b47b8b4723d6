use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use clap::Parser;
use serde::Serialize;

use rankfuse::io::write_dataset;
use rankfuse::synth::{complementary_fixture, gen_dataset, SynthConfig};
use rankfuse::{Error, Result};

use crate::manifest::{in_dir, RunManifest};

#[derive(Parser)]
pub struct Args {
    /// Directory for predictions.jsonl, ground_truth.jsonl and manifest.json.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Built-in dataset: two anti-correlated models where fusion provably helps.
    #[arg(long, value_parser = ["complementary"], conflicts_with = "config")]
    pub preset: Option<String>,
    /// Generator configuration (JSON, see the README for the schema).
    #[arg(long, required_unless_present = "preset")]
    pub config: Option<PathBuf>,
    /// Seed; overrides the config file's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Serialize)]
#[serde(untagged)]
enum ResolvedConfig {
    Fixture(rankfuse::synth::FixtureParams),
    General(SynthConfig),
}

pub fn run(args: Args) -> Result<()> {
    std::fs::create_dir_all(&args.out_dir)?;

    let (instances, seed, config) = if args.preset.is_some() {
        let seed = args.seed.unwrap_or(0);
        let (instances, params) = complementary_fixture(seed);
        (instances, seed, ResolvedConfig::Fixture(params))
    } else {
        let path = args.config.as_ref().expect("clap enforces preset or config");
        let file =
            File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let mut cfg: SynthConfig = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        let instances = gen_dataset(&cfg)?;
        let seed = cfg.seed;
        (instances, seed, ResolvedConfig::General(cfg))
    };

    let predictions = in_dir(&args.out_dir, "predictions.jsonl");
    let ground_truth = in_dir(&args.out_dir, "ground_truth.jsonl");
    write_dataset(&instances, &predictions, &ground_truth)?;

    RunManifest::new("synth")
        .seed(seed)
        .config(&config)?
        .output(&predictions)
        .output(&ground_truth)
        .write(&in_dir(&args.out_dir, "manifest.json"))?;

    eprintln!(
        "wrote {} instances to {}",
        instances.len(),
        args.out_dir.display()
    );
    Ok(())
}
