//! Property tests for the fusion data model, the constrained
//! parameterization, the tokenizer and the similarity kernel.

use proptest::prelude::*;

use rankfuse::learner::{param_to_theta, FreeParams};
use rankfuse::prelude::*;
use rankfuse::sim::CountFingerprint;

const POOL: [&str; 14] =
    ["k00", "k01", "k02", "k03", "k04", "k05", "k06", "k07", "k08", "k09", "k10", "k11", "k12", "k13"];

fn key(s: &str) -> PredictionKey {
    PredictionKey::new(s).unwrap()
}

fn model_ids(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("model-{i}")).collect()
}

/// Random instance: `m` lists of distinct pool keys, each up to `k_max` long.
fn instance_strategy(m: usize, k_max: usize) -> impl Strategy<Value = EnsembleInstance> {
    let list = proptest::sample::subsequence(POOL.to_vec(), 0..=k_max).prop_shuffle();
    (proptest::collection::vec(list, m), 0..POOL.len()).prop_map(move |(lists, gt)| {
        EnsembleInstance {
            input_id: "prop".into(),
            ground_truth: key(POOL[gt]),
            outputs: lists
                .into_iter()
                .enumerate()
                .map(|(i, keys)| {
                    ModelOutput::new(format!("model-{i}"), keys.iter().map(|k| key(k)).collect())
                        .unwrap()
                })
                .collect(),
        }
    })
}

/// Random valid weight matrix: a constrained-parameterization sample or one
/// of the hand-designed schemes.
fn theta_strategy(m: usize, k_max: usize) -> impl Strategy<Value = ThetaMatrix> {
    let ids = model_ids(m);
    let learned = proptest::collection::vec(
        proptest::collection::vec(-3.0f64..3.0, k_max),
        m,
    )
    .prop_map({
        let ids = ids.clone();
        move |rows| param_to_theta(&FreeParams::new(rows).unwrap(), &ids)
    });
    let linear = {
        let ids = ids.clone();
        LazyJust::new(move || baseline_theta(BaselineKind::Linear, &ids, k_max, None).unwrap())
    };
    let reciprocal =
        LazyJust::new(move || baseline_theta(BaselineKind::Reciprocal, &ids, k_max, None).unwrap());
    prop_oneof![4 => learned, 1 => linear, 1 => reciprocal]
}

/// Rank of `k` in model `i`'s list (within k_max), or `None`.
fn rank_in(inst: &EnsembleInstance, i: usize, k_max: usize, k: &PredictionKey) -> Option<usize> {
    let preds = &inst.outputs[i].predictions;
    preds[..preds.len().min(k_max)].iter().position(|p| p == k).map(|p| p + 1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn merge_is_a_truncated_permutation_of_the_union(
        (inst, theta) in (1usize..=3, 1usize..=6).prop_flat_map(|(m, k)| {
            (instance_strategy(m, k), theta_strategy(m, k))
        }),
        limit in 1usize..=20,
    ) {
        let k_max = theta.k_max();
        let merged = merge(&inst, &theta, limit).unwrap();

        let mut union: Vec<PredictionKey> = Vec::new();
        for out in &inst.outputs {
            for k in &out.predictions[..out.predictions.len().min(k_max)] {
                if !union.contains(k) {
                    union.push(k.clone());
                }
            }
        }
        prop_assert_eq!(merged.len(), union.len().min(limit));
        let mut seen = std::collections::HashSet::new();
        for (k, score) in &merged {
            prop_assert!(seen.insert(k.clone()), "duplicate {k} in merge output");
            prop_assert!(union.contains(k));
            prop_assert_eq!(*score, score_prediction(k, &inst, &theta).unwrap());
        }
        // Scores are non-increasing.
        prop_assert!(merged.windows(2).all(|w| w[0].1 >= w[1].1));
    }

    #[test]
    fn merge_respects_monotone_dominance(
        (inst, theta) in (2usize..=3, 2usize..=6).prop_flat_map(|(m, k)| {
            (instance_strategy(m, k), theta_strategy(m, k))
        }),
    ) {
        let k_max = theta.k_max();
        let m = inst.outputs.len();
        let merged = merge(&inst, &theta, usize::MAX.min(1000)).unwrap();
        let pos_of = |k: &PredictionKey| merged.iter().position(|(mk, _)| mk == k);

        for a in &merged {
            for b in &merged {
                if a.0 == b.0 {
                    continue;
                }
                let ranks_a: Vec<usize> =
                    (0..m).map(|i| rank_in(&inst, i, k_max, &a.0).unwrap_or(usize::MAX)).collect();
                let ranks_b: Vec<usize> =
                    (0..m).map(|i| rank_in(&inst, i, k_max, &b.0).unwrap_or(usize::MAX)).collect();
                let dominates = ranks_a.iter().zip(&ranks_b).all(|(x, y)| x <= y)
                    && ranks_a.iter().zip(&ranks_b).any(|(x, y)| x < y);
                if dominates {
                    prop_assert!(pos_of(&a.0).unwrap() < pos_of(&b.0).unwrap(),
                        "{} dominates {} but merges later", a.0, b.0);
                }
            }
        }
    }

    #[test]
    fn identical_lists_merge_to_themselves(
        keys in proptest::sample::subsequence(POOL.to_vec(), 1..=6).prop_shuffle(),
        m in 1usize..=3,
        theta_seed in proptest::collection::vec(-3.0f64..3.0, 6),
    ) {
        let k_max = keys.len();
        let ids = model_ids(m);
        let outputs: Vec<ModelOutput> = ids
            .iter()
            .map(|id| ModelOutput::new(id.clone(), keys.iter().map(|k| key(k)).collect()).unwrap())
            .collect();
        let inst = EnsembleInstance {
            input_id: "same".into(),
            ground_truth: key(keys[0]),
            outputs,
        };
        let x = FreeParams::new(vec![theta_seed[..k_max].to_vec(); m]).unwrap();
        let theta = param_to_theta(&x, &ids);
        let merged = merge(&inst, &theta, k_max).unwrap();
        let order: Vec<&str> = merged.iter().map(|(k, _)| k.as_str()).collect();
        prop_assert_eq!(order, keys);
    }

    #[test]
    fn constrained_parameterization_always_valid(
        rows in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 1..=30), 1..=6),
    ) {
        let k = rows[0].len();
        let rows: Vec<Vec<f64>> = rows.into_iter().map(|mut r| { r.truncate(k); r.resize(k, 0.0); r }).collect();
        let m = rows.len();
        let theta = param_to_theta(&FreeParams::new(rows).unwrap(), &model_ids(m));
        prop_assert!(theta.validate().is_ok());
        for row in theta.rows() {
            for i in 0..row.len().saturating_sub(2) {
                prop_assert!(row[i] - row[i + 1] > row[i + 1] - row[i + 2]);
            }
        }
    }

    #[test]
    fn tanimoto_symmetric_bounded_and_padding_invariant(
        xs in proptest::collection::btree_map(0u32..64, 1u32..9, 1..12),
        ys in proptest::collection::btree_map(0u32..64, 1u32..9, 1..12),
    ) {
        let x = CountFingerprint::new("x", 64, xs.clone().into_iter().collect()).unwrap();
        let y = CountFingerprint::new("y", 64, ys.clone().into_iter().collect()).unwrap();
        let sim_xy = tanimoto_count(&x, &y).unwrap();
        let sim_yx = tanimoto_count(&y, &x).unwrap();
        prop_assert_eq!(sim_xy, sim_yx);
        prop_assert!((0.0..=1.0).contains(&sim_xy));
        prop_assert_eq!(tanimoto_count(&x, &x).unwrap(), 1.0);

        let x_wide = CountFingerprint::new("x", 4096, xs.into_iter().collect()).unwrap();
        let y_wide = CountFingerprint::new("y", 4096, ys.into_iter().collect()).unwrap();
        prop_assert_eq!(tanimoto_count(&x_wide, &y_wide).unwrap(), sim_xy);
    }
}

/// Alphabet for generated SMILES-like strings: every alternative the token
/// pattern accepts.
fn token_alphabet() -> impl Strategy<Value = String> {
    let plain = proptest::sample::select(vec![
        "Br", "Cl", "B", "C", "N", "O", "S", "P", "F", "I", "b", "c", "n", "o", "s", "p", "(",
        ")", ".", "=", "#", "-", "+", "\\", "/", ":", "~", "@", "?", ">", "*", "$", "0", "1",
        "2", "3", "4", "5", "6", "7", "8", "9",
    ])
    .prop_map(str::to_owned);
    let bracket = proptest::string::string_regex("\\[[A-Za-z0-9@+-]{1,6}]").unwrap();
    let ring = proptest::string::string_regex("%[0-9]{2}").unwrap();
    prop_oneof![8 => plain, 2 => bracket, 1 => ring]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn tokenizer_round_trips_generated_corpus(
        tokens in proptest::collection::vec(token_alphabet(), 1..40),
    ) {
        let source: String = tokens.concat();
        let seq = tokenize(&source).unwrap();
        prop_assert_eq!(seq.joined(""), source.clone());
        // For this alphabet the split is unambiguous, so the token sequence
        // itself must round-trip too.
        prop_assert_eq!(seq.tokens().to_vec(), tokens);
        // Two-letter halogens never split into B+r / C+l.
        prop_assert!(seq.tokens().iter().all(|t| t != "r" && t != "l"));
    }
}
