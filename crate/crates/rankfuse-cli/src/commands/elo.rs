use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::Parser;
use serde::Serialize;

use rankfuse::elo::{
    bootstrap_win_rate_ci, fit_bradley_terry, predicted_win_rate, to_elo, Ratings,
};
use rankfuse::io::read_comparisons;
use rankfuse::{Error, Result};

use crate::manifest::{ensure_parent, RunManifest};

#[derive(Parser)]
pub struct Args {
    /// Comparisons JSONL ({"a", "b", "winner": "a"|"b"}).
    #[arg(long)]
    pub comparisons: PathBuf,
    /// Source whose rating is pinned to 0.
    #[arg(long)]
    pub anchor: String,
    /// Report JSON output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Bootstrap resamples for win-rate confidence intervals (0 disables).
    #[arg(long, default_value_t = 10_000)]
    pub resamples: usize,
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Convergence tolerance on the maximum score change.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
}

#[derive(Serialize)]
struct WinRateRow {
    a: String,
    b: String,
    /// Predicted probability that `a` beats `b`.
    rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    ci_low: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ci_high: Option<f64>,
}

#[derive(Serialize)]
struct Report {
    anchor: String,
    scores: BTreeMap<String, f64>,
    elo: BTreeMap<String, f64>,
    win_rates: Vec<WinRateRow>,
}

#[derive(Serialize)]
struct ResolvedConfig<'a> {
    anchor: &'a str,
    resamples: usize,
    confidence: f64,
    tol: f64,
    max_iter: usize,
}

pub fn run(args: Args) -> Result<()> {
    let comparisons = read_comparisons(&args.comparisons)?;
    let scores = fit_bradley_terry(&comparisons, args.tol, args.max_iter)?;
    let ratings: Ratings = to_elo(&scores, &args.anchor)?;

    let intervals = if args.resamples > 0 {
        Some(bootstrap_win_rate_ci(
            &comparisons,
            args.resamples,
            args.confidence,
            args.seed,
            args.tol,
            args.max_iter,
        )?)
    } else {
        None
    };

    let sources: Vec<&String> = ratings.scores.keys().collect();
    let mut win_rates = Vec::new();
    for i in 0..sources.len() {
        for j in i + 1..sources.len() {
            let (a, b) = (sources[i].clone(), sources[j].clone());
            let rate = predicted_win_rate(&ratings, &a, &b)?;
            let iv = intervals.as_ref().and_then(|m| m.get(&(a.clone(), b.clone())));
            win_rates.push(WinRateRow {
                a,
                b,
                rate,
                ci_low: iv.map(|iv| iv.low),
                ci_high: iv.map(|iv| iv.high),
            });
        }
    }

    let report = Report {
        anchor: ratings.anchor.clone(),
        scores: ratings.scores.clone(),
        elo: ratings.elo.clone(),
        win_rates,
    };

    ensure_parent(&args.out)?;
    let mut out = BufWriter::new(File::create(&args.out)?);
    serde_json::to_writer_pretty(&mut out, &report)
        .map_err(|e| Error::Data(format!("{}: {e}", args.out.display())))?;
    out.write_all(b"\n")?;
    out.flush()?;

    RunManifest::new("elo")
        .seed(args.seed)
        .config(&ResolvedConfig {
            anchor: &args.anchor,
            resamples: args.resamples,
            confidence: args.confidence,
            tol: args.tol,
            max_iter: args.max_iter,
        })?
        .input("comparisons", &args.comparisons)?
        .output(&args.out)
        .write_beside(&args.out)?;

    eprintln!(
        "rated {} sources from {} comparisons (anchor {:?})",
        report.scores.len(),
        comparisons.len(),
        report.anchor
    );
    Ok(())
}
