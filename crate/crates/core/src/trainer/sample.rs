use rand::seq::SliceRandom;
use rand::Rng;

use super::config::TrainConfig;
use crate::model::{Batch, ModelConfig, PairContext, RankingItem};
use crate::store::{NeighborIndex, RelationId, Triple, TripleStore};

/// Builds a batch for `positives`: each gets `neg_per_pos` KB relations drawn
/// uniformly (with replacement) from those never observed for its pair, and a
/// context capped at the model's sampling limits.
///
/// A positive whose pair already covers every KB relation is skipped.
pub fn sample_batch(
    positives: &[Triple],
    train: &TripleStore,
    index: &NeighborIndex,
    kb_relations: &[RelationId],
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    rng: &mut impl Rng,
) -> Batch {
    let mut batch = Batch::default();
    for pos in positives {
        let observed = train.relations_between(pos.subject, pos.object);
        let candidates: Vec<RelationId> = kb_relations
            .iter()
            .copied()
            .filter(|r| observed.binary_search(r).is_err())
            .collect();
        if candidates.is_empty() {
            log::warn!(
                "pair ({}, {}) is observed with every KB relation; no negative available",
                pos.subject,
                pos.object
            );
            continue;
        }
        let context = batch.contexts.len();
        for _ in 0..cfg.neg_per_pos {
            let negative = *candidates.choose(rng).expect("nonempty");
            batch.items.push(RankingItem {
                context,
                positive: pos.relation,
                negative,
            });
        }
        let exclude = model_cfg.exclude_self.then_some(pos.relation);
        batch.contexts.push(PairContext::sampled(
            index,
            pos.subject,
            pos.object,
            exclude,
            model_cfg.max_pair_predicates,
            model_cfg.max_neighbors,
            rng,
        ));
    }
    batch
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{EntityId, RelationKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn kb(s: u32, r: u32, o: u32) -> Triple {
        Triple::new(EntityId(s), RelationId(r), EntityId(o), RelationKind::Kb)
    }

    fn oie(s: u32, r: u32, o: u32) -> Triple {
        Triple::new(EntityId(s), RelationId(r), EntityId(o), RelationKind::OpenIe)
    }

    #[test]
    fn forced_negative() {
        let store: TripleStore = [kb(0, 0, 1), kb(2, 1, 3)].into_iter().collect();
        let idx = NeighborIndex::build(&store);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = sample_batch(&[kb(0, 0, 1)], &store, &idx, &[RelationId(0), RelationId(1)], &ModelConfig::default(), &TrainConfig::default(), &mut rng);
        assert_eq!(b.items.len(), 16);
        assert!(b.items.iter().all(|i| i.negative == RelationId(1)));
    }

    #[test]
    fn saturated_pair_is_skipped() {
        let store: TripleStore = [kb(0, 0, 1), kb(0, 1, 1)].into_iter().collect();
        let idx = NeighborIndex::build(&store);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = sample_batch(&[kb(0, 0, 1)], &store, &idx, &[RelationId(0), RelationId(1)], &ModelConfig::default(), &TrainConfig::default(), &mut rng);
        assert!(b.items.is_empty() && b.contexts.is_empty());
    }

    #[test]
    fn fixed_seed_fixed_batch() {
        let mut store: TripleStore = (0..5).map(|i| kb(i, i % 3, i + 10)).collect();
        for i in 0..5 {
            store.insert(oie(i, 10 + i, i + 10));
        }
        let idx = NeighborIndex::build(&store);
        let pos: Vec<Triple> = store.with_source(RelationKind::Kb).copied().collect();
        let rels: Vec<RelationId> = (0..3).map(RelationId).collect();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample_batch(&pos, &store, &idx, &rels, &ModelConfig::default(), &TrainConfig::default(), &mut rng)
        };
        assert_eq!(run(4), run(4));
    }

    #[test]
    fn pair_predicates_are_capped() {
        let mut store: TripleStore = [kb(0, 0, 1)].into_iter().collect();
        for p in 0..10 {
            store.insert(oie(0, 100 + p, 1));
        }
        let idx = NeighborIndex::build(&store);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = sample_batch(&[kb(0, 0, 1)], &store, &idx, &[RelationId(0), RelationId(1)], &ModelConfig::default(), &TrainConfig::default(), &mut rng);
        assert_eq!(b.contexts[0].pair_relations.len(), 8);
        // the positive itself is excluded from its context
        assert!(!b.contexts[0].pair_relations.contains(&RelationId(0)));
        assert_eq!(b.contexts[0].subject_neighbors.len(), 10);
    }
}
