use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde::Serialize;

use rankfuse::io::write_theta;
use rankfuse::ranklist::{baseline_theta, BaselineKind};
use rankfuse::Result;

use crate::manifest::{ensure_parent, RunManifest};

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KindArg {
    Linear,
    Reciprocal,
    WeightedReciprocal,
}

impl From<KindArg> for BaselineKind {
    fn from(value: KindArg) -> Self {
        match value {
            KindArg::Linear => BaselineKind::Linear,
            KindArg::Reciprocal => BaselineKind::Reciprocal,
            KindArg::WeightedReciprocal => BaselineKind::WeightedReciprocal,
        }
    }
}

#[derive(Parser)]
pub struct Args {
    /// Weighting scheme.
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Model ids, in the dataset's model order.
    #[arg(long, value_delimiter = ',', required = true)]
    pub model_ids: Vec<String>,
    #[arg(long)]
    pub k_max: usize,
    /// Per-model coefficients for weighted-reciprocal, e.g. --weights 2,1.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    /// Theta checkpoint output path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct ResolvedConfig<'a> {
    kind: KindArg,
    model_ids: &'a [String],
    k_max: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<&'a [f64]>,
}

pub fn run(args: Args) -> Result<()> {
    let theta =
        baseline_theta(args.kind.into(), &args.model_ids, args.k_max, args.weights.as_deref())?;
    ensure_parent(&args.out)?;
    write_theta(&args.out, &theta)?;

    RunManifest::new("baseline")
        .config(&ResolvedConfig {
            kind: args.kind,
            model_ids: &args.model_ids,
            k_max: args.k_max,
            weights: args.weights.as_deref(),
        })?
        .output(&args.out)
        .write_beside(&args.out)?;

    eprintln!("wrote {}x{} baseline theta to {}", theta.n_models(), theta.k_max(), args.out.display());
    Ok(())
}
