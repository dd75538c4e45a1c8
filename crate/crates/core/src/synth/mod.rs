//! Seeded synthetic worlds: typed entities, typed KB relations, and OpenIE
//! predicates that are noisy unions of KB relations.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EntityTypes;
use crate::store::{pair_hash, EntityId, Pair, RelationId, RelationKind, SplitSpec, Triple, TripleStore, Vocabulary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub num_entities: usize,
    pub num_kb_relations: usize,
    pub num_predicates: usize,
    pub num_types: usize,
    /// Mean number of KB relations each predicate unions.
    pub ambiguity: f64,
    /// Fraction of test pairs with an entity absent from training KB triples.
    pub unseen_entity_rate: f64,
    /// Fraction of OpenIE triples that are spurious.
    pub noise_rate: f64,
    /// Mean number of KB facts an entity takes part in.
    pub facts_per_entity: f64,
    /// Probability that a fact is mentioned by a second predicate.
    pub extra_mention_rate: f64,
    pub held_out_fraction: f64,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            num_entities: 500,
            num_kb_relations: 10,
            num_predicates: 30,
            num_types: 3,
            ambiguity: 2.0,
            unseen_entity_rate: 0.5,
            noise_rate: 0.1,
            facts_per_entity: 5.0,
            extra_mention_rate: 0.3,
            held_out_fraction: 0.2,
            seed: 0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [self.num_entities, self.num_kb_relations, self.num_predicates, self.num_types];
        if counts.contains(&0) {
            return Err(Error::InvalidConfig("world sizes must be at least 1".into()));
        }
        let rates = [self.unseen_entity_rate, self.noise_rate, self.extra_mention_rate];
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::InvalidConfig("rates must lie in [0, 1]".into()));
        }
        if !(self.held_out_fraction > 0.0 && self.held_out_fraction < 1.0) {
            return Err(Error::InvalidConfig("held_out_fraction must lie in (0, 1)".into()));
        }
        if !(self.ambiguity >= 1.0) || !(self.facts_per_entity > 0.0) {
            return Err(Error::InvalidConfig("ambiguity must be >= 1 and facts_per_entity > 0".into()));
        }
        Ok(())
    }
}

/// A generated world with its split and ground truth.
#[derive(Clone, Debug)]
pub struct World {
    pub vocab: Vocabulary,
    pub kb: TripleStore,
    pub openie: TripleStore,
    pub split: SplitSpec,
    /// Predicate → the KB relations it unions.
    pub gold: BTreeMap<RelationId, BTreeSet<RelationId>>,
    pub entity_types: EntityTypes,
    /// Entities whose KB triples are all held out.
    pub unseen: BTreeSet<EntityId>,
}

impl World {
    /// Writes `kb.tsv`, `openie.tsv`, `gold.tsv`, `types.tsv` and the split
    /// under `split/`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.kb.write_tsv(&dir.join("kb.tsv"), &self.vocab)?;
        self.openie.write_tsv(&dir.join("openie.tsv"), &self.vocab)?;
        let mut gold = Vec::new();
        for (p, rels) in &self.gold {
            for r in rels {
                writeln!(gold, "{}\t{}", self.vocab.relation_name(*p), self.vocab.relation_name(*r)).expect("in-memory write");
            }
        }
        let gold_path = dir.join("gold.tsv");
        fs::write(&gold_path, gold).map_err(|e| Error::io(&gold_path, e))?;
        let mut types = Vec::new();
        for (e, ts) in &self.entity_types {
            for t in ts {
                writeln!(types, "{}\t{t}", self.vocab.entity_name(*e)).expect("in-memory write");
            }
        }
        let types_path = dir.join("types.tsv");
        fs::write(&types_path, types).map_err(|e| Error::io(&types_path, e))?;
        self.split.write(&dir.join("split"), &self.vocab)
    }

    /// Fraction of test pairs touching an entity absent from training KB
    /// triples.
    pub fn test_unseen_rate(&self) -> f64 {
        let seen = self.split.seen_entities();
        let pairs = self.split.test_pairs();
        let unseen = pairs
            .iter()
            .filter(|(s, o)| !seen.contains(s) || !seen.contains(o))
            .count();
        unseen as f64 / pairs.len().max(1) as f64
    }
}

fn type_name(t: usize) -> String {
    format!("type{t}")
}

/// Order relations by how much their signatures differ from `sig`.
fn partner_order(sig: (usize, usize), sigs: &[(usize, usize)], own: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut others: Vec<usize> = (0..sigs.len()).filter(|&r| r != own).collect();
    others.shuffle(rng);
    others.sort_by_key(|&r| {
        let (a, b) = sigs[r];
        let same = usize::from(a == sig.0) + usize::from(b == sig.1);
        same
    });
    others
}

/// Generates a world deterministically from `cfg`.
pub fn generate_world(cfg: &WorldConfig) -> Result<World> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut vocab = Vocabulary::new();

    let entities: Vec<EntityId> = (0..cfg.num_entities).map(|i| vocab.intern_entity(&format!("ent{i}"))).collect();
    let entity_type: Vec<usize> = (0..cfg.num_entities).map(|_| rng.gen_range(0..cfg.num_types)).collect();
    let mut by_type: Vec<Vec<usize>> = vec![Vec::new(); cfg.num_types];
    for (i, &t) in entity_type.iter().enumerate() {
        by_type[t].push(i);
    }

    let mut all_sigs: Vec<(usize, usize)> = (0..cfg.num_types)
        .flat_map(|a| (0..cfg.num_types).map(move |b| (a, b)))
        .filter(|&(a, b)| !by_type[a].is_empty() && !by_type[b].is_empty() && (a != b || by_type[a].len() > 1))
        .collect();
    if all_sigs.is_empty() {
        return Err(Error::InfeasibleWorld("no type signature admits a pair of distinct entities".into()));
    }
    all_sigs.shuffle(&mut rng);
    let sigs: Vec<(usize, usize)> = (0..cfg.num_kb_relations).map(|r| all_sigs[r % all_sigs.len()]).collect();
    let relations: Vec<RelationId> = (0..cfg.num_kb_relations)
        .map(|r| vocab.intern_relation(&format!("kb:rel{r}"), RelationKind::Kb))
        .collect::<Result<_>>()?;

    let mut gold: BTreeMap<RelationId, BTreeSet<RelationId>> = BTreeMap::new();
    let mut expressed_by: Vec<Vec<RelationId>> = vec![Vec::new(); cfg.num_kb_relations];
    for j in 0..cfg.num_predicates {
        let pred = vocab.intern_relation(&format!("pred{j}"), RelationKind::OpenIe)?;
        let primary = j % cfg.num_kb_relations;
        let extra = cfg.ambiguity.fract();
        let size = (cfg.ambiguity.floor() as usize + usize::from(rng.gen_bool(extra))).min(cfg.num_kb_relations);
        let mut union = vec![primary];
        union.extend(partner_order(sigs[primary], &sigs, primary, &mut rng).into_iter().take(size - 1));
        for &r in &union {
            expressed_by[r].push(pred);
        }
        gold.insert(pred, union.into_iter().map(|r| relations[r]).collect());
    }

    let target_facts = (cfg.facts_per_entity * cfg.num_entities as f64 / 2.0).round().max(1.0) as usize;
    let mut kb = TripleStore::new();
    let mut used: BTreeSet<Pair> = BTreeSet::new();
    for k in 0..target_facts {
        let r = k % cfg.num_kb_relations;
        let (a, b) = sigs[r];
        for _ in 0..64 {
            let s = entities[*by_type[a].choose(&mut rng).expect("nonempty type")];
            let o = entities[*by_type[b].choose(&mut rng).expect("nonempty type")];
            if s != o && used.insert((s, o)) {
                kb.insert(Triple::new(s, relations[r], o, RelationKind::Kb));
                break;
            }
        }
    }

    let mut openie = TripleStore::new();
    for t in kb.iter() {
        let preds = &expressed_by[t.relation.index()];
        let Some(&p) = preds.choose(&mut rng) else { continue };
        openie.insert(Triple::new(t.subject, p, t.object, RelationKind::OpenIe));
        if preds.len() > 1 && rng.gen_bool(cfg.extra_mention_rate) {
            let q = *preds.iter().filter(|&&q| q != p).collect::<Vec<_>>().choose(&mut rng).expect("two predicates");
            openie.insert(Triple::new(t.subject, *q, t.object, RelationKind::OpenIe));
        }
    }
    if cfg.noise_rate > 0.0 {
        if cfg.noise_rate >= 1.0 || cfg.num_entities < 2 {
            return Err(Error::InfeasibleWorld("noise rate leaves no room for real mentions".into()));
        }
        let clean = openie.len();
        let target = (clean as f64 * cfg.noise_rate / (1.0 - cfg.noise_rate)).round() as usize;
        let preds: Vec<RelationId> = gold.keys().copied().collect();
        let mut added = 0;
        let mut attempts = 0;
        while added < target {
            attempts += 1;
            if attempts > 100 * (target + 1) {
                return Err(Error::InfeasibleWorld("cannot place noise triples".into()));
            }
            let s = *entities.choose(&mut rng).expect("entities");
            let o = *entities.choose(&mut rng).expect("entities");
            let p = *preds.choose(&mut rng).expect("predicates");
            if s != o && !used.contains(&(s, o)) && openie.insert(Triple::new(s, p, o, RelationKind::OpenIe)) {
                added += 1;
            }
        }
    }

    let (split, unseen) = choose_split(cfg, &kb, &openie, &mut rng)?;
    let entity_types = entities
        .iter()
        .zip(&entity_type)
        .map(|(&e, &t)| (e, [type_name(t)].into_iter().collect()))
        .collect();
    Ok(World {
        vocab,
        kb,
        openie,
        split,
        gold,
        entity_types,
        unseen,
    })
}

/// Holds out every KB pair of a random entity set `U` until the unseen share
/// is reached, then fills the rest with pairs whose entities both keep a
/// training KB triple.
fn choose_split(
    cfg: &WorldConfig,
    kb: &TripleStore,
    openie: &TripleStore,
    rng: &mut ChaCha8Rng,
) -> Result<(SplitSpec, BTreeSet<EntityId>)> {
    let eligible: BTreeSet<Pair> = crate::store::eligible_pairs(kb, openie).into_iter().collect();
    let kb_pairs: Vec<Pair> = kb.pairs().map(|(p, _)| *p).collect();
    if eligible.is_empty() {
        return Err(Error::InfeasibleWorld("no KB pair has an OpenIE mention".into()));
    }
    let n_held = ((cfg.held_out_fraction * eligible.len() as f64).round() as usize).clamp(1, eligible.len());
    let unseen_target = (cfg.unseen_entity_rate * n_held as f64).round() as usize;

    let mut touching: BTreeMap<EntityId, Vec<Pair>> = BTreeMap::new();
    for &p in &kb_pairs {
        touching.entry(p.0).or_default().push(p);
        touching.entry(p.1).or_default().push(p);
    }
    let mut candidates: Vec<EntityId> = touching
        .iter()
        .filter(|(_, ps)| ps.iter().all(|p| eligible.contains(p)))
        .map(|(e, _)| *e)
        .collect();
    candidates.shuffle(rng);

    let mut unseen = BTreeSet::new();
    let mut unseen_pairs: BTreeSet<Pair> = BTreeSet::new();
    for e in candidates {
        if unseen_pairs.len() >= unseen_target {
            break;
        }
        let new: Vec<Pair> = touching[&e].iter().copied().filter(|p| !unseen_pairs.contains(p)).collect();
        if unseen_pairs.len() + new.len() > n_held {
            continue;
        }
        unseen.insert(e);
        unseen_pairs.extend(new);
    }
    if unseen_pairs.len() < unseen_target {
        return Err(Error::InfeasibleWorld(format!(
            "only {} of {unseen_target} unseen-entity pairs can be held out",
            unseen_pairs.len()
        )));
    }

    let mut degree: BTreeMap<EntityId, usize> = BTreeMap::new();
    for &(s, o) in kb_pairs.iter().filter(|p| !unseen_pairs.contains(p)) {
        *degree.entry(s).or_default() += 1;
        *degree.entry(o).or_default() += 1;
    }
    let mut seen_candidates: Vec<Pair> = eligible.iter().copied().filter(|p| !unseen_pairs.contains(p)).collect();
    seen_candidates.shuffle(rng);
    let seen_target = n_held - unseen_pairs.len();
    let mut seen_pairs: BTreeSet<Pair> = BTreeSet::new();
    for (s, o) in seen_candidates {
        if seen_pairs.len() >= seen_target {
            break;
        }
        if degree[&s] >= 2 && degree[&o] >= 2 {
            *degree.get_mut(&s).expect("counted") -= 1;
            *degree.get_mut(&o).expect("counted") -= 1;
            seen_pairs.insert((s, o));
        }
    }
    if seen_pairs.len() < seen_target {
        return Err(Error::InfeasibleWorld(format!(
            "only {} of {seen_target} seen-entity pairs can be held out",
            seen_pairs.len()
        )));
    }

    let by_hash = |set: &BTreeSet<Pair>| {
        let mut v: Vec<Pair> = set.iter().copied().collect();
        v.sort_by_key(|&p| (pair_hash(p), p));
        v
    };
    let n_test = n_held.div_ceil(2);
    let unseen_order = by_hash(&unseen_pairs);
    let seen_order = by_hash(&seen_pairs);
    let unseen_test = ((n_test as f64 * unseen_pairs.len() as f64 / n_held as f64).round() as usize).min(unseen_order.len());
    let seen_test = (n_test - unseen_test).min(seen_order.len());
    let test: BTreeSet<Pair> = unseen_order[..unseen_test]
        .iter()
        .chain(&seen_order[..seen_test])
        .copied()
        .collect();
    let valid: BTreeSet<Pair> = unseen_order[unseen_test..]
        .iter()
        .chain(&seen_order[seen_test..])
        .copied()
        .collect();
    Ok((
        SplitSpec::from_partition(kb, openie, &test, &valid, cfg.seed, cfg.held_out_fraction),
        unseen,
    ))
}
