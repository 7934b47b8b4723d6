//! Evaluation of ranked outputs: top-k accuracy, MRR, and accuracy bucketed
//! by a per-instance scalar (e.g. fingerprint similarity to training data).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranklist::PredictionKey;

/// One instance's merged ranking, ready for scoring against a ground truth.
#[derive(Debug, Clone)]
pub struct MergedInstance {
    pub input_id: String,
    pub ranked: Vec<PredictionKey>,
}

/// 1-based rank of `truth` in `ranked`, `None` when absent.
fn rank_of(ranked: &[PredictionKey], truth: &PredictionKey) -> Option<usize> {
    ranked.iter().position(|k| k == truth).map(|p| p + 1)
}

fn truth_for<'a>(
    truth: &'a BTreeMap<String, PredictionKey>,
    inst: &MergedInstance,
) -> Result<&'a PredictionKey> {
    truth
        .get(&inst.input_id)
        .ok_or_else(|| Error::Data(format!("no ground truth for input {:?}", inst.input_id)))
}

/// Fraction of instances whose truth appears within the first `k` entries,
/// for each requested `k`.
pub fn topk_accuracy(
    merged: &[MergedInstance],
    truth: &BTreeMap<String, PredictionKey>,
    ks: &[usize],
) -> Result<BTreeMap<usize, f64>> {
    if merged.is_empty() {
        return Err(Error::InvalidArgument("no instances to evaluate".into()));
    }
    if ks.iter().any(|&k| k == 0) {
        return Err(Error::InvalidArgument("accuracy cutoff k must be positive".into()));
    }
    let mut hits: BTreeMap<usize, usize> = ks.iter().map(|&k| (k, 0)).collect();
    for inst in merged {
        let t = truth_for(truth, inst)?;
        if let Some(rank) = rank_of(&inst.ranked, t) {
            for (&k, count) in hits.iter_mut() {
                if rank <= k {
                    *count += 1;
                }
            }
        }
    }
    let n = merged.len() as f64;
    Ok(hits.into_iter().map(|(k, c)| (k, c as f64 / n)).collect())
}

/// Mean reciprocal rank of the truth; absent counts as zero.
pub fn mrr(merged: &[MergedInstance], truth: &BTreeMap<String, PredictionKey>) -> Result<f64> {
    if merged.is_empty() {
        return Err(Error::InvalidArgument("no instances to evaluate".into()));
    }
    let mut sum = 0.0;
    for inst in merged {
        let t = truth_for(truth, inst)?;
        if let Some(rank) = rank_of(&inst.ranked, t) {
            sum += 1.0 / rank as f64;
        }
    }
    Ok(sum / merged.len() as f64)
}

/// One half-open metadata bucket `[lo, hi)` with its top-k accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// `None` for empty buckets.
    pub accuracy: Option<f64>,
}

/// Top-`k` accuracy per metadata bucket.
///
/// `boundaries` must be strictly increasing; bucket `j` is the half-open
/// interval `[boundaries[j], boundaries[j+1])`, so a value equal to an
/// interior boundary lands in the upper bucket. Every instance must fall in
/// some bucket (choose the last boundary strictly above the largest value).
pub fn bucketed_accuracy(
    merged: &[MergedInstance],
    truth: &BTreeMap<String, PredictionKey>,
    metadata: &BTreeMap<String, f64>,
    boundaries: &[f64],
    k: usize,
) -> Result<Vec<Bucket>> {
    if merged.is_empty() {
        return Err(Error::InvalidArgument("no instances to evaluate".into()));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("accuracy cutoff k must be positive".into()));
    }
    if boundaries.len() < 2 {
        return Err(Error::InvalidArgument("need at least two bucket boundaries".into()));
    }
    if boundaries.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("bucket boundaries must be strictly increasing".into()));
    }

    let n_buckets = boundaries.len() - 1;
    let mut counts = vec![0usize; n_buckets];
    let mut hits = vec![0usize; n_buckets];
    for inst in merged {
        let t = truth_for(truth, inst)?;
        let value = *metadata.get(&inst.input_id).ok_or_else(|| {
            Error::Data(format!("no metadata value for input {:?}", inst.input_id))
        })?;
        // Upper bucket on exact boundary hits: first j with value < boundaries[j+1].
        let bucket = (0..n_buckets)
            .find(|&j| value >= boundaries[j] && value < boundaries[j + 1])
            .ok_or_else(|| {
                Error::Data(format!(
                    "metadata value {value} for input {:?} is outside [{}, {})",
                    inst.input_id,
                    boundaries[0],
                    boundaries[n_buckets]
                ))
            })?;
        counts[bucket] += 1;
        if rank_of(&inst.ranked, t).is_some_and(|r| r <= k) {
            hits[bucket] += 1;
        }
    }

    Ok((0..n_buckets)
        .map(|j| Bucket {
            lo: boundaries[j],
            hi: boundaries[j + 1],
            count: counts[j],
            accuracy: (counts[j] > 0).then(|| hits[j] as f64 / counts[j] as f64),
        })
        .collect())
}

/// Aggregate report for one evaluation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n_instances: usize,
    pub topk: BTreeMap<usize, f64>,
    pub mrr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub buckets: Option<Vec<Bucket>>,
}

/// Convenience wrapper computing top-k accuracies, MRR and optional buckets.
pub fn evaluate(
    merged: &[MergedInstance],
    truth: &BTreeMap<String, PredictionKey>,
    ks: &[usize],
    bucketing: Option<(&BTreeMap<String, f64>, &[f64], usize)>,
) -> Result<EvaluationReport> {
    let topk = topk_accuracy(merged, truth, ks)?;
    let mrr = mrr(merged, truth)?;
    let buckets = match bucketing {
        Some((metadata, boundaries, k)) => {
            Some(bucketed_accuracy(merged, truth, metadata, boundaries, k)?)
        }
        None => None,
    };
    Ok(EvaluationReport { n_instances: merged.len(), topk, mrr, buckets })
}
