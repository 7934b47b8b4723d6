use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::Parser;
use serde::Serialize;

use rankfuse::io::read_fingerprints;
use rankfuse::sim::{near_duplicate_filter, DEFAULT_BLOCK};
use rankfuse::Result;

use crate::manifest::{ensure_parent, RunManifest};

#[derive(Parser)]
pub struct Args {
    /// Query fingerprints JSONL.
    #[arg(long)]
    pub queries: PathBuf,
    /// Reference fingerprints JSONL.
    #[arg(long)]
    pub references: PathBuf,
    /// Queries with maximum similarity >= threshold are dropped.
    #[arg(long, default_value_t = 0.95)]
    pub threshold: f64,
    /// Dense panel edge for the blocked kernel.
    #[arg(long, default_value_t = DEFAULT_BLOCK)]
    pub block: usize,
    /// Output: one retained query id per line, in input order.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct ResolvedConfig {
    threshold: f64,
    block: usize,
}

pub fn run(args: Args) -> Result<()> {
    let queries = read_fingerprints(&args.queries)?;
    let references = read_fingerprints(&args.references)?;
    let retained = near_duplicate_filter(&queries, &references, args.threshold, args.block)?;

    ensure_parent(&args.out)?;
    let mut out = BufWriter::new(File::create(&args.out)?);
    for id in &retained {
        writeln!(out, "{id}")?;
    }
    out.flush()?;

    RunManifest::new("simfilter")
        .config(&ResolvedConfig { threshold: args.threshold, block: args.block })?
        .input("queries", &args.queries)?
        .input("references", &args.references)?
        .output(&args.out)
        .write_beside(&args.out)?;

    eprintln!("retained {} of {} queries (threshold {})", retained.len(), queries.len(), args.threshold);
    Ok(())
}
