use std::collections::{BTreeMap, BTreeSet};

use super::triples::{Pair, TripleStore};
use super::vocab::{EntityId, RelationId, RelationKind};

/// Precomputed neighborhoods `R(s,·)`, `R(·,o)` and `R(s,o)`.
///
/// Entity lists keep one entry per triple, so a relation seen with several
/// partners appears several times. All lists are sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NeighborIndex {
    by_subject: BTreeMap<EntityId, Vec<RelationId>>,
    by_object: BTreeMap<EntityId, Vec<RelationId>>,
    by_pair: BTreeMap<Pair, Vec<RelationId>>,
}

impl NeighborIndex {
    pub fn build(store: &TripleStore) -> Self {
        Self::build_hiding(store, &BTreeSet::new())
    }

    /// Like [`build`](Self::build), but OpenIE triples of `hidden` pairs are
    /// left out of the entity lists. Pair lists are unaffected.
    pub fn build_hiding(store: &TripleStore, hidden: &BTreeSet<Pair>) -> Self {
        let mut index = NeighborIndex::default();
        for t in store.iter() {
            index.by_pair.entry(t.pair()).or_default().push(t.relation);
            if t.source == RelationKind::OpenIe && hidden.contains(&t.pair()) {
                continue;
            }
            index.by_subject.entry(t.subject).or_default().push(t.relation);
            index.by_object.entry(t.object).or_default().push(t.relation);
        }
        for list in index
            .by_subject
            .values_mut()
            .chain(index.by_object.values_mut())
            .chain(index.by_pair.values_mut())
        {
            list.sort_unstable();
        }
        index
    }

    pub fn subject_neighbors(&self, e: EntityId) -> &[RelationId] {
        self.by_subject.get(&e).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn object_neighbors(&self, e: EntityId) -> &[RelationId] {
        self.by_object.get(&e).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn pair_relations(&self, s: EntityId, o: EntityId) -> &[RelationId] {
        self.by_pair.get(&(s, o)).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&Pair, &[RelationId])> + '_ {
        self.by_pair.iter().map(|(p, r)| (p, r.as_slice()))
    }

    /// True if `e` occurs in any indexed triple.
    pub fn knows(&self, e: EntityId) -> bool {
        self.by_subject.contains_key(&e) || self.by_object.contains_key(&e)
    }
}
