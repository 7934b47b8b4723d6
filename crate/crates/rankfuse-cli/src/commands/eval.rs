use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::Parser;
use serde::Serialize;

use rankfuse::io::{read_ground_truth, read_merged, read_metadata_csv, write_buckets_csv};
use rankfuse::metrics::evaluate;
use rankfuse::{Error, Result};

use crate::manifest::{ensure_parent, RunManifest};

#[derive(Parser)]
pub struct Args {
    /// Merged rankings JSONL ({"input_id", "ranked": [...]}).
    #[arg(long)]
    pub merged: PathBuf,
    /// Ground-truth JSONL.
    #[arg(long)]
    pub ground_truth: PathBuf,
    /// Accuracy cutoffs, e.g. --ks 1,3,5,10,20,50.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 3, 5, 10, 20, 50])]
    pub ks: Vec<usize>,
    /// Report JSON output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-instance scalar metadata CSV (input_id,value) for bucketing.
    #[arg(long, requires = "boundaries")]
    pub metadata: Option<PathBuf>,
    /// Bucket boundaries, strictly increasing; buckets are [b_j, b_{j+1}).
    #[arg(long, value_delimiter = ',', requires = "metadata")]
    pub boundaries: Option<Vec<f64>>,
    /// Accuracy cutoff inside buckets (default: the largest of --ks).
    #[arg(long)]
    pub bucket_k: Option<usize>,
    /// Optional CSV of per-bucket rows.
    #[arg(long, requires = "metadata")]
    pub buckets_out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ResolvedConfig<'a> {
    ks: &'a [usize],
    #[serde(skip_serializing_if = "Option::is_none")]
    boundaries: Option<&'a [f64]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bucket_k: Option<usize>,
}

pub fn run(args: Args) -> Result<()> {
    let merged = read_merged(&args.merged)?;
    let truth = read_ground_truth(&args.ground_truth)?;

    let metadata = args.metadata.as_ref().map(|p| read_metadata_csv(p)).transpose()?;
    let bucket_k = match args.bucket_k {
        Some(k) => Some(k),
        None => args.ks.iter().max().copied(),
    };
    let bucketing = match (&metadata, &args.boundaries) {
        (Some(meta), Some(bounds)) => {
            let k = bucket_k.ok_or_else(|| Error::InvalidArgument("no bucket k".into()))?;
            Some((meta, bounds.as_slice(), k))
        }
        _ => None,
    };

    let report = evaluate(&merged, &truth, &args.ks, bucketing)?;

    ensure_parent(&args.out)?;
    let mut out = BufWriter::new(File::create(&args.out)?);
    serde_json::to_writer_pretty(&mut out, &report)
        .map_err(|e| Error::Data(format!("{}: {e}", args.out.display())))?;
    out.write_all(b"\n")?;
    out.flush()?;

    if let (Some(path), Some(buckets)) = (&args.buckets_out, &report.buckets) {
        ensure_parent(path)?;
        write_buckets_csv(path, buckets)?;
    }

    let mut manifest = RunManifest::new("eval")
        .config(&ResolvedConfig {
            ks: &args.ks,
            boundaries: args.boundaries.as_deref(),
            bucket_k: args.boundaries.is_some().then_some(bucket_k).flatten(),
        })?
        .input("merged", &args.merged)?
        .input("ground_truth", &args.ground_truth)?;
    if let Some(path) = &args.metadata {
        manifest = manifest.input("metadata", path)?;
    }
    manifest = manifest.output(&args.out);
    if let Some(path) = &args.buckets_out {
        manifest = manifest.output(path);
    }
    manifest.write_beside(&args.out)?;

    eprintln!(
        "evaluated {} instances: mrr {:.4}{}",
        report.n_instances,
        report.mrr,
        report
            .topk
            .iter()
            .map(|(k, v)| format!(", top-{k} {v:.4}"))
            .collect::<String>()
    );
    Ok(())
}
