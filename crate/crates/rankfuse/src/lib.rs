//! Fuse ranked prediction lists from multiple models into a single,
//! higher-accuracy ranking.
//!
//! Any system that returns an ordered list of candidate answers per input
//! (retrosynthesis models, retrievers, recommenders) can be combined here:
//! each (model, rank) slot gets a positive weight, a candidate's score is
//! the sum of the weights of the slots it occupies, and candidates merge by
//! decreasing score. The weight matrix can be a hand-designed scheme
//! (linear, reciprocal-rank) or learned from a validation set under a
//! decreasing-convex constraint with a pairwise ranking loss.
//!
//! The crate also carries the surrounding evaluation toolkit: top-k
//! accuracy / MRR / bucketed reports, count-fingerprint Tanimoto similarity
//! with a blocked all-pairs kernel and near-duplicate filtering, a SMILES
//! tokenizer, Bradley-Terry / ELO fitting of pairwise expert judgments with
//! bootstrap confidence intervals, and a seeded synthetic-dataset generator
//! for end-to-end validation without any trained models.
//!
//! # Example
//!
//! ```
//! use rankfuse::prelude::*;
//!
//! let (dataset, _params) = rankfuse::synth::complementary_fixture(7);
//! let cfg = TrainConfig { steps: 40, ..TrainConfig::default() };
//! let fitted = fit(&dataset[..500], 10, &cfg, None).unwrap();
//! let merged = merge(&dataset[0], &fitted.theta, 10).unwrap();
//! assert!(!merged.is_empty());
//! ```
//!
//! # Parallelism
//!
//! With the default `parallel` feature, per-instance loops (pair-table
//! construction, loss/gradient accumulation, the similarity kernel,
//! bootstrap resampling) run on rayon. Reductions are chunked and folded in
//! a fixed order, so outputs are bit-identical with the feature disabled or
//! with any thread count.

pub mod elo;
pub mod error;
mod exec;
pub mod io;
pub mod learner;
pub mod metrics;
pub mod ranklist;
pub mod sim;
pub mod synth;
pub mod tokenize;

pub use error::{Error, Result};

/// Common imports.
pub mod prelude {
    pub use crate::elo::{
        bootstrap_win_rate_ci, fit_bradley_terry, predicted_win_rate, to_elo, Comparison, Ratings,
        Winner,
    };
    pub use crate::error::{Error, Result};
    pub use crate::learner::{
        build_pair_table, fit, param_to_theta, rank_loss, reg_loss, total_loss_grad, FitOutcome,
        FreeParams, PairTable, ScheduleKind, TrainConfig,
    };
    pub use crate::metrics::{
        bucketed_accuracy, evaluate, mrr, topk_accuracy, EvaluationReport, MergedInstance,
    };
    pub use crate::ranklist::{
        baseline_theta, merge, merge_outputs, score_prediction, BaselineKind, EnsembleInstance,
        ModelOutput, PredictionKey, ThetaMatrix,
    };
    pub use crate::sim::{max_similarity, near_duplicate_filter, tanimoto_count, CountFingerprint};
    pub use crate::synth::{complementary_fixture, gen_dataset, SynthConfig};
    pub use crate::tokenize::{tokenize, TokenSequence};
}
