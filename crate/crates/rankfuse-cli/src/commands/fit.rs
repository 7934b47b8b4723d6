use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde::Serialize;

use rankfuse::io::{load_dataset, write_theta, write_training_log};
use rankfuse::learner::{fit, ScheduleKind, TrainConfig};
use rankfuse::{Error, Result};

use crate::manifest::{ensure_parent, RunManifest};

#[derive(Clone, Copy, ValueEnum)]
pub enum ScheduleArg {
    Geometric,
    Linear,
}

impl From<ScheduleArg> for ScheduleKind {
    fn from(value: ScheduleArg) -> Self {
        match value {
            ScheduleArg::Geometric => ScheduleKind::Geometric,
            ScheduleArg::Linear => ScheduleKind::Linear,
        }
    }
}

#[derive(Parser)]
pub struct Args {
    /// Predictions JSONL (one record per input per model, grouped by input).
    #[arg(long)]
    pub predictions: PathBuf,
    /// Ground-truth JSONL.
    #[arg(long)]
    pub ground_truth: PathBuf,
    /// Ranks considered per model; longer lists are truncated at ingestion.
    #[arg(long, default_value_t = 50)]
    pub k_max: usize,
    /// Where to write the theta checkpoint.
    #[arg(long)]
    pub theta_out: PathBuf,
    /// Where to write the training log CSV (default: `<theta-out>.train.csv`).
    #[arg(long)]
    pub log_out: Option<PathBuf>,
    /// Training configuration JSON; any field present overrides the default,
    /// and explicit flags below override the file.
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub lr0: Option<f64>,
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long)]
    pub decay_factor: Option<f64>,
    #[arg(long)]
    pub decay_every: Option<usize>,
    /// Margin added to the score difference inside the pair loss.
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long)]
    pub w_reg: Option<f64>,
    #[arg(long)]
    pub schedule: Option<ScheduleArg>,
}

#[derive(Serialize)]
struct ResolvedConfig<'a> {
    k_max: usize,
    train: &'a TrainConfig,
}

fn resolve_config(args: &Args) -> Result<TrainConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let file =
                File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
            serde_json::from_reader(BufReader::new(file))
                .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        }
        None => TrainConfig::default(),
    };
    if let Some(v) = args.steps {
        cfg.steps = v;
    }
    if let Some(v) = args.lr0 {
        cfg.lr0 = v;
    }
    if let Some(v) = args.t0 {
        cfg.t0 = v;
    }
    if let Some(v) = args.decay_factor {
        cfg.decay_factor = v;
    }
    if let Some(v) = args.decay_every {
        cfg.decay_every = v;
    }
    if let Some(v) = args.margin {
        cfg.epsilon_margin = v;
    }
    if let Some(v) = args.w_reg {
        cfg.w_reg = v;
    }
    if let Some(v) = args.schedule {
        cfg.schedule_kind = v.into();
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(args: Args) -> Result<()> {
    let cfg = resolve_config(&args)?;
    let dataset = load_dataset(&args.predictions, &args.ground_truth, Some(args.k_max))?;
    let outcome = fit(&dataset, args.k_max, &cfg, None)?;
    if outcome.degenerate {
        return Err(Error::Degenerate(
            "every training pair was removed by the dominance filter; \
             nothing to optimize (are the model lists disjoint or identical?)"
                .into(),
        ));
    }

    let log_out = args
        .log_out
        .clone()
        .unwrap_or_else(|| args.theta_out.with_extension("train.csv"));
    ensure_parent(&args.theta_out)?;
    ensure_parent(&log_out)?;
    write_theta(&args.theta_out, &outcome.theta)?;
    write_training_log(&log_out, &outcome.log)?;

    RunManifest::new("fit")
        .config(&ResolvedConfig { k_max: args.k_max, train: &cfg })?
        .input("predictions", &args.predictions)?
        .input("ground_truth", &args.ground_truth)?
        .output(&args.theta_out)
        .output(&log_out)
        .write_beside(&args.theta_out)?;

    let last = outcome.log.last().expect("non-degenerate fit logs steps");
    eprintln!(
        "fit {} instances ({} models, k_max {}): loss {:.6} -> {:.6} over {} steps",
        dataset.len(),
        outcome.theta.n_models(),
        args.k_max,
        outcome.log.first().map(|r| r.loss).unwrap_or(f64::NAN),
        last.loss,
        cfg.steps,
    );
    Ok(())
}
