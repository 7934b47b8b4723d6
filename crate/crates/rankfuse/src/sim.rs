//! Count-fingerprint Tanimoto similarity and an exhaustive all-pairs
//! maximum-similarity kernel.
//!
//! Similarity between count vectors x and y is
//!
//! ```text
//! sim(x, y) = <x, y> / (<x, x> + <y, y> - <x, y>)
//! ```
//!
//! The all-pairs kernel pads the feature dimension to the next power of two,
//! materializes dense panels per block of queries and references, and scans
//! dot products with precomputed squared norms. Zero padding and the dense
//! scan add only exact zeros in the same index order as the sparse
//! formulation, so the blocked result is bit-identical to a naive pairwise
//! evaluation, including argmax tie-breaks.

use crate::error::{Error, Result};
use crate::exec;

/// Default block edge for the all-pairs kernel (queries x references).
pub const DEFAULT_BLOCK: usize = 1024;

/// A sparse nonnegative integer count vector over a fixed feature dimension.
///
/// All-zero fingerprints are rejected at construction; a silent zero vector
/// usually means broken upstream featurization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountFingerprint {
    id: String,
    dim: usize,
    /// (feature index, count), sorted by index, counts >= 1.
    counts: Vec<(u32, u32)>,
}

impl CountFingerprint {
    pub fn new(id: impl Into<String>, dim: usize, mut counts: Vec<(u32, u32)>) -> Result<Self> {
        let id = id.into();
        if dim == 0 {
            return Err(Error::InvalidArgument(format!("fingerprint {id:?}: dim must be positive")));
        }
        if counts.is_empty() {
            return Err(Error::InvalidArgument(format!("fingerprint {id:?} is all-zero")));
        }
        counts.sort_unstable_by_key(|&(idx, _)| idx);
        for window in counts.windows(2) {
            if window[0].0 == window[1].0 {
                return Err(Error::InvalidArgument(format!(
                    "fingerprint {id:?}: duplicate feature index {}",
                    window[0].0
                )));
            }
        }
        for &(idx, count) in &counts {
            if idx as usize >= dim {
                return Err(Error::InvalidArgument(format!(
                    "fingerprint {id:?}: feature index {idx} out of range for dim {dim}"
                )));
            }
            if count == 0 {
                return Err(Error::InvalidArgument(format!(
                    "fingerprint {id:?}: zero count at feature index {idx}"
                )));
            }
        }
        Ok(Self { id, dim, counts })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn counts(&self) -> &[(u32, u32)] {
        &self.counts
    }

    /// Squared Euclidean norm, summed in ascending index order.
    fn sq_norm(&self) -> f64 {
        let mut acc = 0.0;
        for &(_, c) in &self.counts {
            let c = c as f64;
            acc += c * c;
        }
        acc
    }
}

/// Tanimoto similarity adapted to count fingerprints. Symmetric, in [0, 1],
/// and exactly 1 for identical nonzero inputs.
pub fn tanimoto_count(x: &CountFingerprint, y: &CountFingerprint) -> Result<f64> {
    if x.dim != y.dim {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: {} ({:?}) vs {} ({:?})",
            x.dim, x.id, y.dim, y.id
        )));
    }
    let (nx, ny) = (x.sq_norm(), y.sq_norm());
    if nx == 0.0 && ny == 0.0 {
        return Err(Error::InvalidArgument("similarity of two all-zero fingerprints".into()));
    }
    // Sorted-merge intersection, ascending index order.
    let mut dot = 0.0;
    let (mut i, mut j) = (0, 0);
    while i < x.counts.len() && j < y.counts.len() {
        let (xi, xc) = x.counts[i];
        let (yi, yc) = y.counts[j];
        match xi.cmp(&yi) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += xc as f64 * yc as f64;
                i += 1;
                j += 1;
            }
        }
    }
    Ok(dot / (nx + ny - dot))
}

/// Best match of one query against a reference set.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxSim {
    pub query_id: String,
    pub max_sim: f64,
    pub argmax_id: String,
}

fn uniform_dim(queries: &[CountFingerprint], references: &[CountFingerprint]) -> Result<usize> {
    let dim = references
        .first()
        .or_else(|| queries.first())
        .map(|f| f.dim)
        .unwrap_or(0);
    for f in queries.iter().chain(references) {
        if f.dim != dim {
            return Err(Error::InvalidArgument(format!(
                "dimension mismatch: fingerprint {:?} has dim {} but the set uses {}",
                f.id, f.dim, dim
            )));
        }
    }
    Ok(dim)
}

/// Densify a block of fingerprints into a row-major panel of width `padded`.
fn densify(block: &[CountFingerprint], padded: usize) -> Vec<f64> {
    let mut panel = vec![0.0; block.len() * padded];
    for (row, fp) in block.iter().enumerate() {
        let base = row * padded;
        for &(idx, count) in &fp.counts {
            panel[base + idx as usize] = count as f64;
        }
    }
    panel
}

/// For each query, the maximum count-Tanimoto similarity over `references`
/// and the id achieving it (sim ties go to the lexicographically smallest
/// reference id).
///
/// `block` bounds the dense panel edge; memory is O(block * padded_dim) per
/// worker. Query blocks are processed in parallel when the `parallel`
/// feature is on; the result does not depend on the thread count.
pub fn max_similarity(
    queries: &[CountFingerprint],
    references: &[CountFingerprint],
    block: usize,
) -> Result<Vec<MaxSim>> {
    if references.is_empty() {
        return Err(Error::InvalidArgument("empty reference set".into()));
    }
    if block == 0 {
        return Err(Error::InvalidArgument("block size must be positive".into()));
    }
    if queries.is_empty() {
        return Ok(Vec::new());
    }
    let dim = uniform_dim(queries, references)?;
    let padded = dim.next_power_of_two();

    let ref_norms: Vec<f64> = references.iter().map(CountFingerprint::sq_norm).collect();
    let ref_norms = &ref_norms;

    let per_block = exec::map_chunks(queries, block, move |qblock| {
        let qpanel = densify(qblock, padded);
        let qnorms: Vec<f64> = qblock.iter().map(CountFingerprint::sq_norm).collect();
        let mut best: Vec<(f64, &str)> = vec![(f64::NEG_INFINITY, ""); qblock.len()];

        for (rstart, rblock) in references.chunks(block).enumerate().map(|(b, c)| (b * block, c)) {
            let rpanel = densify(rblock, padded);
            for (qi, qnorm) in qnorms.iter().enumerate() {
                let qrow = &qpanel[qi * padded..(qi + 1) * padded];
                let slot = &mut best[qi];
                for (ri, rfp) in rblock.iter().enumerate() {
                    let rrow = &rpanel[ri * padded..(ri + 1) * padded];
                    let mut dot = 0.0;
                    for (a, b) in qrow.iter().zip(rrow) {
                        dot += a * b;
                    }
                    let sim = dot / (qnorm + ref_norms[rstart + ri] - dot);
                    if sim > slot.0 || (sim == slot.0 && rfp.id.as_str() < slot.1) {
                        *slot = (sim, &rfp.id);
                    }
                }
            }
        }

        qblock
            .iter()
            .zip(best)
            .map(|(q, (sim, id))| MaxSim {
                query_id: q.id.clone(),
                max_sim: sim,
                argmax_id: id.to_owned(),
            })
            .collect::<Vec<_>>()
    });

    Ok(per_block.into_iter().flatten().collect())
}

/// Ids of the queries whose maximum similarity to any reference stays
/// strictly below `threshold`, in input order.
pub fn near_duplicate_filter(
    queries: &[CountFingerprint],
    references: &[CountFingerprint],
    threshold: f64,
    block: usize,
) -> Result<Vec<String>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} not in (0, 1]")));
    }
    let maxima = max_similarity(queries, references, block)?;
    Ok(maxima
        .into_iter()
        .filter(|m| m.max_sim < threshold)
        .map(|m| m.query_id)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn fp(id: &str, dim: usize, counts: &[(u32, u32)]) -> CountFingerprint {
        CountFingerprint::new(id, dim, counts.to_vec()).unwrap()
    }

    #[test]
    fn construction_validates() {
        assert!(CountFingerprint::new("z", 8, vec![]).is_err());
        assert!(CountFingerprint::new("z", 8, vec![(9, 1)]).is_err());
        assert!(CountFingerprint::new("z", 8, vec![(1, 0)]).is_err());
        assert!(CountFingerprint::new("z", 8, vec![(1, 2), (1, 3)]).is_err());
    }

    #[test]
    fn self_similarity_is_one() {
        let x = fp("x", 16, &[(0, 3), (7, 1), (12, 5)]);
        assert_eq!(tanimoto_count(&x, &x).unwrap(), 1.0);
    }

    #[test]
    fn worked_two_thirds() {
        let x = fp("x", 4, &[(0, 1), (1, 2)]);
        let y = fp("y", 4, &[(0, 2), (1, 1)]);
        // 4 / (5 + 5 - 4) = 2/3.
        assert_eq!(tanimoto_count(&x, &y).unwrap(), 2.0 / 3.0);
        assert_eq!(tanimoto_count(&y, &x).unwrap(), 2.0 / 3.0);
    }

    #[test]
    fn disjoint_supports_score_zero() {
        let x = fp("x", 8, &[(0, 2)]);
        let y = fp("y", 8, &[(5, 3)]);
        assert_eq!(tanimoto_count(&x, &y).unwrap(), 0.0);
    }

    #[test]
    fn dim_mismatch_is_an_error() {
        let x = fp("x", 8, &[(0, 1)]);
        let y = fp("y", 16, &[(0, 1)]);
        assert!(tanimoto_count(&x, &y).is_err());
    }

    fn random_set(rng: &mut ChaCha20Rng, prefix: &str, n: usize, dim: usize) -> Vec<CountFingerprint> {
        (0..n)
            .map(|i| {
                let nnz = rng.gen_range(4..32);
                let mut counts = std::collections::BTreeMap::new();
                for _ in 0..nnz {
                    counts.insert(rng.gen_range(0..dim as u32), rng.gen_range(1..8u32));
                }
                CountFingerprint::new(
                    format!("{prefix}{i:04}"),
                    dim,
                    counts.into_iter().collect(),
                )
                .unwrap()
            })
            .collect()
    }

    /// Naive double-loop oracle with the same tie-break rule.
    fn naive_max(queries: &[CountFingerprint], refs: &[CountFingerprint]) -> Vec<MaxSim> {
        queries
            .iter()
            .map(|q| {
                let mut best_sim = f64::NEG_INFINITY;
                let mut best_id = "";
                for r in refs {
                    let sim = tanimoto_count(q, r).unwrap();
                    if sim > best_sim || (sim == best_sim && r.id() < best_id) {
                        best_sim = sim;
                        best_id = r.id();
                    }
                }
                MaxSim { query_id: q.id().to_owned(), max_sim: best_sim, argmax_id: best_id.to_owned() }
            })
            .collect()
    }

    #[test]
    fn blocked_matches_naive_oracle() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let queries = random_set(&mut rng, "q", 160, 300);
        let refs = random_set(&mut rng, "r", 90, 300);
        // Small block to force several panels per side.
        let blocked = max_similarity(&queries, &refs, 32).unwrap();
        let naive = naive_max(&queries, &refs);
        assert_eq!(blocked.len(), naive.len());
        for (b, n) in blocked.iter().zip(&naive) {
            assert_eq!(b.query_id, n.query_id);
            assert_eq!(b.argmax_id, n.argmax_id);
            assert!((b.max_sim - n.max_sim).abs() <= 1e-12);
        }
    }

    #[test]
    fn self_reference_maximum_is_identity() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let set = random_set(&mut rng, "s", 40, 128);
        for m in max_similarity(&set, &set, 16).unwrap() {
            assert_eq!(m.max_sim, 1.0);
        }
    }

    #[test]
    fn single_reference_equals_scalar_similarity() {
        let q = fp("q", 8, &[(0, 1), (1, 2)]);
        let r = fp("r", 8, &[(0, 2), (1, 1)]);
        let out = max_similarity(&[q.clone()], &[r.clone()], 4).unwrap();
        assert_eq!(out[0].max_sim, tanimoto_count(&q, &r).unwrap());
        assert_eq!(out[0].argmax_id, "r");
    }

    #[test]
    fn empty_references_rejected() {
        let q = fp("q", 8, &[(0, 1)]);
        assert!(max_similarity(&[q], &[], 4).is_err());
    }

    #[test]
    fn padding_does_not_change_similarity() {
        // Same support, wider feature dimension: identical similarity.
        let narrow =
            tanimoto_count(&fp("a", 5, &[(0, 1), (3, 4)]), &fp("b", 5, &[(0, 2), (3, 1)])).unwrap();
        let wide = tanimoto_count(
            &fp("a", 4096, &[(0, 1), (3, 4)]),
            &fp("b", 4096, &[(0, 2), (3, 1)]),
        )
        .unwrap();
        assert_eq!(narrow, wide);
    }

    #[test]
    fn filter_drops_high_similarity_queries() {
        let a = fp("a", 16, &[(0, 1), (2, 3)]);
        let b = fp("b", 16, &[(5, 2)]);
        let refs = vec![a.clone()];
        // a is identical to a reference (sim 1.0) and must be removed.
        let retained = near_duplicate_filter(&[a.clone(), b.clone()], &refs, 0.95, 8).unwrap();
        assert_eq!(retained, vec!["b".to_string()]);
        // Threshold 1.0 retains everything strictly below 1.
        let retained = near_duplicate_filter(&[b.clone()], &refs, 1.0, 8).unwrap();
        assert_eq!(retained, vec!["b".to_string()]);
        // Queries that are a subset of the references are all removed.
        let retained = near_duplicate_filter(&[a.clone()], &refs, 0.95, 8).unwrap();
        assert!(retained.is_empty());
        assert!(near_duplicate_filter(&[a], &refs, 0.0, 8).is_err());
    }
}
