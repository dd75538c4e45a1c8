mod common;

use std::collections::BTreeSet;

use openki::bayes::{fit_counts, prob_p_given_all, prob_p_given_entities, prob_p_given_preds, CountTables, DEFAULT_DELTA};
use openki::eval::{auc_pr, average_precision, mean_average_precision, rank_desc, EvalOptions};
use openki::model::sample_capped;
use openki::store::{split_holdout, EntityId, NeighborIndex, Pair, RelationId, RelationKind, Triple, TripleStore, Vocabulary};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ranked_relevance(scores: &[f64], labels: &[bool]) -> Vec<bool> {
    let mut items: Vec<(usize, f64)> = scores.iter().copied().enumerate().collect();
    rank_desc(&mut items);
    items.into_iter().map(|(i, _)| labels[i]).collect()
}

fn scores_and_labels() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (1usize..12).prop_flat_map(|n| {
        (
            prop::collection::vec((-300i32..300).prop_map(|x| x as f64 / 100.0), n),
            prop::collection::vec(any::<bool>(), n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn attention_properties(seed in any::<u64>()) {
        prop_assert_eq!(common::attention_case(seed), Ok(()));
    }

    #[test]
    fn average_precision_matches_oracle(rel in prop::collection::vec(any::<bool>(), 0..12)) {
        let ap = average_precision(&rel);
        let oracle = common::ap_oracle(&rel);
        prop_assert_eq!(ap.is_some(), oracle.is_some());
        if let (Some(a), Some(b)) = (ap, oracle) {
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn auc_pr_matches_threshold_oracle((scores, mut labels) in scores_and_labels()) {
        labels[0] = true;
        let a = auc_pr(&scores, &labels).unwrap();
        prop_assert!((a - common::auc_pr_oracle(&scores, &labels)).abs() < 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&a));
    }

    #[test]
    fn metrics_ignore_monotone_transforms((scores, mut labels) in scores_and_labels(), which in 0usize..4) {
        labels[0] = true;
        let f = |x: f64| match which {
            0 => x.exp(),
            1 => x * x * x,
            2 => 3.0 * x + 7.0,
            _ => x.sinh(),
        };
        let moved: Vec<f64> = scores.iter().map(|&x| f(x)).collect();
        prop_assert_eq!(
            average_precision(&ranked_relevance(&scores, &labels)),
            average_precision(&ranked_relevance(&moved, &labels))
        );
        prop_assert_eq!(auc_pr(&scores, &labels).unwrap(), auc_pr(&moved, &labels).unwrap());
    }

    #[test]
    fn bayes_probabilities_are_in_unit_interval(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (vocab, store) = common::random_graph(&mut rng, 6, 3, 4, 6, 10);
        let tables = fit_counts(&store, &vocab);
        let index = NeighborIndex::build(&store);
        for (&(s, o), observed) in store.pairs() {
            for p in vocab.kb_relations() {
                let a = prob_p_given_preds(&tables, observed, p).unwrap();
                let b = prob_p_given_entities(&tables, &index, s, o, p);
                let c = prob_p_given_all(&tables, &index, s, observed, o, p).unwrap();
                for v in [a, b, c] {
                    prop_assert!(v > 0.0 && v <= 1.0, "{}", v);
                }
            }
        }
    }

    #[test]
    fn bayes_monotone_in_joint_count(pair in 0u64..50, extra in 1u64..10, pred in 50u64..100) {
        let (p, q) = (RelationId(0), RelationId(1));
        let tables = |joint| CountTables {
            pair_count: [((p, q), joint)].into_iter().collect(),
            pred_count: [(q, pred)].into_iter().collect(),
            num_relations: 7,
            delta: DEFAULT_DELTA,
        };
        let lo = prob_p_given_preds(&tables(pair), &[q], p).unwrap();
        let hi = prob_p_given_preds(&tables(pair + extra), &[q], p).unwrap();
        prop_assert!(hi > lo);
    }

    #[test]
    fn capped_sample_is_ordered_subset(items in prop::collection::vec(0u32..20, 0..30), cap in 1usize..10, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picked = sample_capped(&items, cap, &mut rng);
        prop_assert_eq!(picked.len(), items.len().min(cap));
        let mut it = items.iter();
        for x in &picked {
            prop_assert!(it.any(|y| y == x), "order or membership broken");
        }
    }

    #[test]
    fn split_never_leaks_held_out_kb_facts(seed in any::<u64>(), fraction in 0.05f64..0.95) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, store) = common::random_graph(&mut rng, 10, 3, 4, 15, 25);
        let kb = store.filtered(|t| t.source == RelationKind::Kb);
        let oie = store.filtered(|t| t.source == RelationKind::OpenIe);
        let split = split_holdout(&kb, &oie, fraction, seed).unwrap();
        let held = split.held_out_pairs();
        for t in split.train.with_source(RelationKind::Kb) {
            prop_assert!(!held.contains(&t.pair()));
        }
        prop_assert_eq!(split.train.with_source(RelationKind::OpenIe).count(), oie.len());
        prop_assert_eq!(split.train.len() + split.valid.len() + split.test.len(), store.len());
        let test: BTreeSet<Pair> = split.test_pairs().into_iter().collect();
        prop_assert!(split.valid_pairs().iter().all(|p| !test.contains(p)));
    }
}

#[test]
fn indicator_scorer_has_unit_map() {
    let mut vocab = Vocabulary::new();
    let r = vocab.intern_relation("r", RelationKind::Kb).unwrap();
    let pairs: Vec<Pair> = (0..5).map(|i| (EntityId(i), EntityId(i + 5))).collect();
    let truth: TripleStore = pairs
        .iter()
        .step_by(2)
        .map(|&(s, o)| Triple::new(s, r, o, RelationKind::Kb))
        .collect();
    let report = mean_average_precision(
        |(s, o), q| if truth.contains(s, q, o) { 1.0 } else { 0.0 },
        &truth,
        &pairs,
        &[r],
        &vocab,
        EvalOptions::default(),
    );
    assert_eq!(report.map, 1.0);
}
