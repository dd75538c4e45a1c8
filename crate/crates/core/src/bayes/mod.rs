//! Count-based Bayesian baselines: `P(p|p̄′)` from pair-level
//! co-occurrence, `P(p|s,o)` from entity neighborhoods, and their product
//! `P(p|s,p̄′,o)`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::store::{EntityId, NeighborIndex, RelationId, RelationKind, TripleStore, Vocabulary};

pub const DEFAULT_DELTA: f64 = 1e-6;

/// Co-occurrence counts over entity pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct CountTables {
    /// `(p, p′)` → number of pairs exhibiting both KB relation `p` and `p′`.
    pub pair_count: BTreeMap<(RelationId, RelationId), u64>,
    /// `p′` → number of pairs exhibiting `p′`.
    pub pred_count: BTreeMap<RelationId, u64>,
    /// `|R^text ∪ R^KB|`.
    pub num_relations: usize,
    pub delta: f64,
}

/// Counts every relation of every pair in `train` against the KB relations of
/// the same pair. `p′` ranges over both OpenIE predicates and KB relations.
pub fn fit_counts(train: &TripleStore, vocab: &Vocabulary) -> CountTables {
    fit_counts_with_delta(train, vocab, DEFAULT_DELTA)
}

pub fn fit_counts_with_delta(train: &TripleStore, vocab: &Vocabulary, delta: f64) -> CountTables {
    assert!(delta > 0.0, "smoothing must be positive");
    let mut pair_count = BTreeMap::new();
    let mut pred_count = BTreeMap::new();
    for (_, rels) in train.pairs() {
        for &q in rels {
            *pred_count.entry(q).or_insert(0) += 1;
        }
        for &p in rels.iter().filter(|&&p| vocab.relation_kind(p) == RelationKind::Kb) {
            for &q in rels {
                *pair_count.entry((p, q)).or_insert(0) += 1;
            }
        }
    }
    CountTables {
        pair_count,
        pred_count,
        num_relations: vocab.num_relations().max(1),
        delta,
    }
}

impl CountTables {
    pub fn pair(&self, p: RelationId, q: RelationId) -> u64 {
        self.pair_count.get(&(p, q)).copied().unwrap_or(0)
    }

    pub fn pred(&self, q: RelationId) -> u64 {
        self.pred_count.get(&q).copied().unwrap_or(0)
    }

    /// Smoothed `P(p|p′) = (#(p,p′)+Δ) / (#p′+|R|Δ)`.
    pub fn conditional(&self, p: RelationId, q: RelationId) -> f64 {
        (self.pair(p, q) as f64 + self.delta) / (self.pred(q) as f64 + self.num_relations as f64 * self.delta)
    }

    /// `Σ_n P(n|e) P(p|n)` with `P(n|e)` the multiplicity share of `n` in the
    /// neighborhood; `1/|R|` for an empty neighborhood.
    pub fn neighborhood_factor(&self, p: RelationId, neighbors: &[RelationId]) -> f64 {
        if neighbors.is_empty() {
            return 1.0 / self.num_relations as f64;
        }
        let mut mult: BTreeMap<RelationId, usize> = BTreeMap::new();
        for &n in neighbors {
            *mult.entry(n).or_insert(0) += 1;
        }
        let total = neighbors.len() as f64;
        mult.into_iter()
            .map(|(n, c)| c as f64 / total * self.conditional(p, n))
            .sum()
    }

    /// `(p, p′, count)` rows with relation names.
    pub fn write_tsv(&self, path: &Path, vocab: &Vocabulary) -> Result<()> {
        let mut out = Vec::new();
        writeln!(out, "p\tp_prime\tcount").expect("in-memory write");
        for (&(p, q), c) in &self.pair_count {
            writeln!(out, "{}\t{}\t{c}", vocab.relation_name(p), vocab.relation_name(q)).expect("in-memory write");
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// `max_{p′ ∈ observed} P(p|p′)`.
pub fn prob_p_given_preds(tables: &CountTables, observed: &[RelationId], p: RelationId) -> Result<f64> {
    observed
        .iter()
        .map(|&q| tables.conditional(p, q))
        .reduce(f64::max)
        .ok_or(Error::EmptyObserved)
}

/// Product of the subject-side and object-side neighborhood sums.
pub fn prob_p_given_entities(tables: &CountTables, index: &NeighborIndex, s: EntityId, o: EntityId, p: RelationId) -> f64 {
    tables.neighborhood_factor(p, index.subject_neighbors(s)) * tables.neighborhood_factor(p, index.object_neighbors(o))
}

pub fn prob_p_given_all(
    tables: &CountTables,
    index: &NeighborIndex,
    s: EntityId,
    observed: &[RelationId],
    o: EntityId,
    p: RelationId,
) -> Result<f64> {
    Ok(prob_p_given_preds(tables, observed, p)? * prob_p_given_entities(tables, index, s, o, p))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum BayesVariant {
    Predicates,
    Entities,
    Joint,
}

impl BayesVariant {
    pub const ALL: [BayesVariant; 3] = [Self::Predicates, Self::Entities, Self::Joint];

    pub fn label(self) -> &'static str {
        match self {
            Self::Predicates => "P(p|p')",
            Self::Entities => "P(p|s,o)",
            Self::Joint => "P(p|s,p',o)",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Predicates => "bayes-preds",
            Self::Entities => "bayes-entities",
            Self::Joint => "bayes-joint",
        }
    }

    /// Score of `p` for `(s, o)` with the pair's relations in `index` as the
    /// observed set. Pairs without observations score 0 under the variants
    /// that need them.
    pub fn score(self, tables: &CountTables, index: &NeighborIndex, s: EntityId, o: EntityId, p: RelationId) -> f64 {
        let observed = index.pair_relations(s, o);
        let result = match self {
            Self::Predicates => prob_p_given_preds(tables, observed, p),
            Self::Entities => Ok(prob_p_given_entities(tables, index, s, o, p)),
            Self::Joint => prob_p_given_all(tables, index, s, observed, o, p),
        };
        result.unwrap_or(0.0)
    }
}

impl fmt::Display for BayesVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BayesVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Unknown {
                what: "bayes variant",
                name: s.to_owned(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::Triple;

    fn t(s: u32, r: RelationId, o: u32, k: RelationKind) -> Triple {
        Triple::new(EntityId(s), r, EntityId(o), k)
    }

    struct Fixture {
        vocab: Vocabulary,
        p: RelationId,
        q: RelationId,
        other: RelationId,
    }

    fn vocab() -> Fixture {
        let mut vocab = Vocabulary::new();
        let p = vocab.intern_relation("kb", RelationKind::Kb).unwrap();
        let q = vocab.intern_relation("says", RelationKind::OpenIe).unwrap();
        let other = vocab.intern_relation("other", RelationKind::OpenIe).unwrap();
        Fixture { vocab, p, q, other }
    }

    #[test]
    fn single_pair_counts() {
        let f = vocab();
        let store: TripleStore = [t(0, f.p, 1, RelationKind::Kb), t(0, f.q, 1, RelationKind::OpenIe)]
            .into_iter()
            .collect();
        let c = fit_counts(&store, &f.vocab);
        assert_eq!(c.pair(f.p, f.q), 1);
        assert_eq!(c.pred(f.q), 1);
    }

    #[test]
    fn half_coverage_conditional() {
        let f = vocab();
        let store: TripleStore = [
            t(0, f.p, 1, RelationKind::Kb),
            t(0, f.q, 1, RelationKind::OpenIe),
            t(2, f.q, 3, RelationKind::OpenIe),
        ]
        .into_iter()
        .collect();
        let c = fit_counts(&store, &f.vocab);
        let d = DEFAULT_DELTA;
        assert_eq!(c.conditional(f.p, f.q), (1.0 + d) / (2.0 + 3.0 * d));
    }

    #[test]
    fn no_openie_means_no_predicate_counts() {
        let f = vocab();
        let store: TripleStore = [t(0, f.p, 1, RelationKind::Kb)].into_iter().collect();
        let c = fit_counts(&store, &f.vocab);
        assert_eq!(c.pair(f.p, f.q), 0);
        assert_eq!(c.pair(f.p, f.other), 0);
    }

    fn synthetic(pair: u64, pred: u64, n: usize) -> (CountTables, RelationId, RelationId) {
        let (p, q) = (RelationId(0), RelationId(1));
        let c = CountTables {
            pair_count: [((p, q), pair)].into_iter().collect(),
            pred_count: [(q, pred)].into_iter().collect(),
            num_relations: n,
            delta: DEFAULT_DELTA,
        };
        (c, p, q)
    }

    #[test]
    fn smoothed_ratio_arithmetic() {
        let (c, p, q) = synthetic(3, 4, 5);
        let v = prob_p_given_preds(&c, &[q], p).unwrap();
        assert_eq!(v, (3.0 + 1e-6) / (4.0 + 5e-6));
        assert!((v - 0.7499993125).abs() < 1e-9);
    }

    #[test]
    fn unseen_predicate_hits_floor() {
        let (c, p, _) = synthetic(3, 4, 5);
        let v = prob_p_given_preds(&c, &[RelationId(9)], p).unwrap();
        assert!((v - 0.2).abs() < 1e-15);
    }

    #[test]
    fn max_over_observed() {
        let (c, p, q) = synthetic(3, 4, 5);
        let a = c.conditional(p, q);
        let b = c.conditional(p, RelationId(9));
        assert_eq!(prob_p_given_preds(&c, &[RelationId(9), q], p).unwrap(), a.max(b));
        assert!(matches!(prob_p_given_preds(&c, &[], p), Err(Error::EmptyObserved)));
    }

    #[test]
    fn single_neighbor_each_side() {
        let f = vocab();
        let store: TripleStore = [
            t(0, f.q, 1, RelationKind::OpenIe),
            t(2, f.p, 3, RelationKind::Kb),
            t(2, f.other, 3, RelationKind::OpenIe),
        ]
        .into_iter()
        .collect();
        let c = fit_counts(&store, &f.vocab);
        let idx = NeighborIndex::build(&store);
        // subject 0 has neighbor q, object 3 has neighbors {p, other}
        let s_side = c.conditional(f.p, f.q);
        let o_side = 0.5 * c.conditional(f.p, f.p) + 0.5 * c.conditional(f.p, f.other);
        let v = prob_p_given_entities(&c, &idx, EntityId(0), EntityId(3), f.p);
        assert!((v - s_side * o_side).abs() < 1e-15);
    }

    #[test]
    fn empty_neighborhood_is_floor() {
        let f = vocab();
        let store: TripleStore = [t(0, f.q, 1, RelationKind::OpenIe)].into_iter().collect();
        let c = fit_counts(&store, &f.vocab);
        let idx = NeighborIndex::build(&store);
        let v = prob_p_given_entities(&c, &idx, EntityId(7), EntityId(8), f.p);
        assert!((v - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn joint_is_the_product() {
        let f = vocab();
        let store: TripleStore = [
            t(0, f.p, 1, RelationKind::Kb),
            t(0, f.q, 1, RelationKind::OpenIe),
            t(0, f.other, 2, RelationKind::OpenIe),
        ]
        .into_iter()
        .collect();
        let c = fit_counts(&store, &f.vocab);
        let idx = NeighborIndex::build(&store);
        let obs = [f.q];
        let a = prob_p_given_preds(&c, &obs, f.p).unwrap();
        let b = prob_p_given_entities(&c, &idx, EntityId(0), EntityId(2), f.p);
        assert_eq!(prob_p_given_all(&c, &idx, EntityId(0), &obs, EntityId(2), f.p).unwrap(), a * b);
    }

    #[test]
    fn variant_names_parse() {
        for v in BayesVariant::ALL {
            assert_eq!(v.name().parse::<BayesVariant>().unwrap(), v);
        }
        assert!("bayes".parse::<BayesVariant>().is_err());
    }

    #[test]
    fn counts_tsv() {
        let f = vocab();
        let store: TripleStore = [t(0, f.p, 1, RelationKind::Kb), t(0, f.q, 1, RelationKind::OpenIe)]
            .into_iter()
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("counts.tsv");
        fit_counts(&store, &f.vocab).write_tsv(&path, &f.vocab).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text, "p\tp_prime\tcount\nkb\tkb\t1\nkb\tsays\t1\n");
    }
}
