//! Bradley-Terry fitting of pairwise preference judgments, ELO-style
//! scaling, predicted win rates and bootstrap confidence intervals.
//!
//! The model puts `P(i beats j) = exp(s_i) / (exp(s_i) + exp(s_j))`. Scores
//! are identifiable only up to an additive shift, so the fit normalizes them
//! to mean zero and [`to_elo`] re-anchors at a chosen source with
//! `elo_i = 400 * log10(e) * (s_i - s_anchor)`. On that scale a 70-point gap
//! corresponds to a predicted win rate just under 60%.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;

/// `400 * log10(e)`: converts natural-log strength differences to ELO points.
pub const ELO_SCALE: f64 = 400.0 * std::f64::consts::LOG10_E;

/// Retries per bootstrap resample before giving up on a degenerate draw.
const RESAMPLE_RETRIES: usize = 100;

/// Which side of a comparison was preferred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    A,
    B,
}

/// One pairwise expert judgment between two prediction sources.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comparison {
    source_a: String,
    source_b: String,
    winner: Winner,
}

impl Comparison {
    pub fn new(source_a: impl Into<String>, source_b: impl Into<String>, winner: Winner) -> Result<Self> {
        let source_a = source_a.into();
        let source_b = source_b.into();
        if source_a == source_b {
            return Err(Error::InvalidArgument(format!(
                "comparison of source {source_a:?} with itself"
            )));
        }
        Ok(Self { source_a, source_b, winner })
    }

    pub fn source_a(&self) -> &str {
        &self.source_a
    }

    pub fn source_b(&self) -> &str {
        &self.source_b
    }

    pub fn winner(&self) -> Winner {
        self.winner
    }

    pub fn winner_id(&self) -> &str {
        match self.winner {
            Winner::A => &self.source_a,
            Winner::B => &self.source_b,
        }
    }

    pub fn loser_id(&self) -> &str {
        match self.winner {
            Winner::A => &self.source_b,
            Winner::B => &self.source_a,
        }
    }
}

/// Fitted strengths plus their anchored ELO view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ratings {
    /// Mean-zero log strengths.
    pub scores: BTreeMap<String, f64>,
    /// `ELO_SCALE * (s_i - s_anchor)`; the anchor itself rates 0.
    pub elo: BTreeMap<String, f64>,
    pub anchor: String,
}

struct CountMatrix {
    sources: Vec<String>,
    wins: Vec<f64>,
    /// Symmetric comparison counts, `n[i][j]` = matches between i and j.
    n: Vec<Vec<f64>>,
}

fn aggregate(comparisons: &[Comparison]) -> Result<CountMatrix> {
    if comparisons.is_empty() {
        return Err(Error::InvalidArgument("no comparison records".into()));
    }
    let sources: Vec<String> = comparisons
        .iter()
        .flat_map(|c| [c.source_a.clone(), c.source_b.clone()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if sources.len() < 2 {
        return Err(Error::InvalidArgument("need at least two sources".into()));
    }
    let index: BTreeMap<&str, usize> =
        sources.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();

    let m = sources.len();
    let mut n = vec![vec![0.0; m]; m];
    let mut wins = vec![0.0; m];
    for c in comparisons {
        let wi = index[c.winner_id()];
        let li = index[c.loser_id()];
        n[wi][li] += 1.0;
        n[li][wi] += 1.0;
        wins[wi] += 1.0;
    }

    // Degenerate-likelihood checks: a source that never wins (or never
    // loses) pushes its strength to -inf (+inf).
    for (i, src) in sources.iter().enumerate() {
        let total: f64 = n[i].iter().sum();
        if wins[i] == 0.0 {
            return Err(Error::Degenerate(format!("source {src:?} has zero wins")));
        }
        if wins[i] == total {
            return Err(Error::Degenerate(format!("source {src:?} has zero losses")));
        }
    }

    // Connectivity of the comparison graph via union-find.
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..m {
        for j in i + 1..m {
            if n[i][j] > 0.0 {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri] = rj;
            }
        }
    }
    let root = find(&mut parent, 0);
    for i in 1..m {
        if find(&mut parent, i) != root {
            return Err(Error::Degenerate(format!(
                "comparison graph is disconnected: source {:?} is unreachable from {:?}",
                sources[i], sources[0]
            )));
        }
    }

    Ok(CountMatrix { sources, wins, n })
}

/// Maximum-likelihood Bradley-Terry scores, normalized to mean zero.
///
/// Fitting uses minorization-maximization iterations (monotone and
/// derivative-free), stopping when the largest score change drops below
/// `tol` or erroring out after `max_iter` sweeps.
pub fn fit_bradley_terry(
    comparisons: &[Comparison],
    tol: f64,
    max_iter: usize,
) -> Result<BTreeMap<String, f64>> {
    let counts = aggregate(comparisons)?;
    let scores = fit_counts(&counts, tol, max_iter)?;
    Ok(counts.sources.into_iter().zip(scores).collect())
}

fn fit_counts(counts: &CountMatrix, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    let m = counts.sources.len();
    let mut strength = vec![1.0f64; m];
    for _ in 0..max_iter {
        let mut next = vec![0.0f64; m];
        for i in 0..m {
            let mut denom = 0.0;
            for j in 0..m {
                if j != i && counts.n[i][j] > 0.0 {
                    denom += counts.n[i][j] / (strength[i] + strength[j]);
                }
            }
            next[i] = counts.wins[i] / denom;
        }
        // Normalize to geometric mean 1 so the log scores are mean zero.
        let log_mean = next.iter().map(|p| p.ln()).sum::<f64>() / m as f64;
        let scale = log_mean.exp();
        for p in next.iter_mut() {
            *p /= scale;
        }
        let delta = strength
            .iter()
            .zip(&next)
            .map(|(a, b)| (a.ln() - b.ln()).abs())
            .fold(0.0f64, f64::max);
        strength = next;
        if delta < tol {
            return Ok(strength.iter().map(|p| p.ln()).collect());
        }
    }
    Err(Error::Degenerate(format!(
        "Bradley-Terry fit did not converge within {max_iter} iterations"
    )))
}

/// Anchor scores at `anchor` and scale to ELO points.
pub fn to_elo(scores: &BTreeMap<String, f64>, anchor: &str) -> Result<Ratings> {
    let s_anchor = *scores
        .get(anchor)
        .ok_or_else(|| Error::InvalidArgument(format!("anchor source {anchor:?} is not rated")))?;
    let elo = scores.iter().map(|(k, &s)| (k.clone(), ELO_SCALE * (s - s_anchor))).collect();
    Ok(Ratings { scores: scores.clone(), elo, anchor: anchor.to_owned() })
}

/// Predicted probability that `i` beats `j` under the fitted ratings.
pub fn predicted_win_rate(ratings: &Ratings, i: &str, j: &str) -> Result<f64> {
    let ei = *ratings
        .elo
        .get(i)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown source {i:?}")))?;
    let ej = *ratings
        .elo
        .get(j)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown source {j:?}")))?;
    Ok(1.0 / (1.0 + 10f64.powf(-(ei - ej) / 400.0)))
}

/// Percentile bootstrap interval on a predicted win rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WinRateInterval {
    pub low: f64,
    pub high: f64,
}

/// Bootstrap confidence intervals for all pairwise win rates.
///
/// Resamples the comparison records with replacement, refits, and takes the
/// percentile interval of each pair's predicted win rate. Keyed by source
/// pair `(i, j)` with `i < j` lexicographically; the stored rate is
/// `P(i beats j)`. Resamples with a degenerate fit are redrawn a bounded
/// number of times. Deterministic given the seed, with or without the
/// `parallel` feature.
pub fn bootstrap_win_rate_ci(
    comparisons: &[Comparison],
    n_resamples: usize,
    confidence: f64,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> Result<BTreeMap<(String, String), WinRateInterval>> {
    if n_resamples == 0 {
        return Err(Error::InvalidArgument("need at least one resample".into()));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidArgument(format!("confidence {confidence} not in (0, 1)")));
    }
    // Validate the full data once; also fixes the source set and pair order.
    let full = aggregate(comparisons)?;
    fit_counts(&full, tol, max_iter)?;
    let sources = full.sources;
    let mut pairs = Vec::new();
    for i in 0..sources.len() {
        for j in i + 1..sources.len() {
            pairs.push((i, j));
        }
    }
    let n = comparisons.len();

    let per_resample: Vec<Result<Vec<f64>>> = exec::map_indexed(n_resamples, |r| {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(r as u64 + 1);
        for _ in 0..RESAMPLE_RETRIES {
            let resample: Vec<Comparison> =
                (0..n).map(|_| comparisons[rng.gen_range(0..n)].clone()).collect();
            let counts = match aggregate(&resample) {
                Ok(c) => c,
                Err(_) => continue,
            };
            // A resample must cover every source for the pair grid to align.
            if counts.sources != sources {
                continue;
            }
            match fit_counts(&counts, tol, max_iter) {
                Ok(scores) => {
                    let rates = pairs
                        .iter()
                        .map(|&(i, j)| 1.0 / (1.0 + (scores[j] - scores[i]).exp()))
                        .collect();
                    return Ok(rates);
                }
                Err(_) => continue,
            }
        }
        Err(Error::Degenerate(format!(
            "resample {r} stayed degenerate after {RESAMPLE_RETRIES} redraws"
        )))
    });

    let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(n_resamples); pairs.len()];
    for result in per_resample {
        let rates = result?;
        for (bucket, rate) in samples.iter_mut().zip(rates) {
            bucket.push(rate);
        }
    }

    let alpha = (1.0 - confidence) / 2.0;
    let mut out = BTreeMap::new();
    for (&(i, j), values) in pairs.iter().zip(samples.iter_mut()) {
        values.sort_by(f64::total_cmp);
        let interval = WinRateInterval {
            low: percentile(values, alpha),
            high: percentile(values, 1.0 - alpha),
        };
        out.insert((sources[i].clone(), sources[j].clone()), interval);
    }
    Ok(out)
}

/// Linear-interpolated quantile of sorted values.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let last = sorted.len() - 1;
    let pos = q * last as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}
