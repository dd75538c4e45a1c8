use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::store::{EntityId, Pair, RelationId, RelationKind, TripleStore, Vocabulary};

/// Admission threshold on `P(type | argument of relation)`.
pub const DEFAULT_TYPE_THRESHOLD: f64 = 0.05;

pub type EntityTypes = BTreeMap<EntityId, BTreeSet<String>>;

/// Allowed argument types of a relation; an empty set means unconstrained.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ArgTypes {
    pub subject: BTreeSet<String>,
    pub object: BTreeSet<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TypeMap {
    pub entity_types: EntityTypes,
    pub relation_arg_types: BTreeMap<RelationId, ArgTypes>,
}

/// Reads `entity<TAB>type` lines. Entities missing from `vocab` are skipped.
pub fn read_entity_types(path: &Path, vocab: &Vocabulary) -> Result<EntityTypes> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut types = EntityTypes::new();
    let mut skipped = 0usize;
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let Some((entity, ty)) = line.split_once('\t') else {
            return Err(Error::MalformedLine {
                line: n + 1,
                reason: "expected entity<TAB>type".into(),
            });
        };
        match vocab.entity_id(entity) {
            Some(id) => {
                types.entry(id).or_default().insert(ty.trim().to_owned());
            }
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        log::warn!("{}: skipped {skipped} typed entities absent from the vocabulary", path.display());
    }
    Ok(types)
}

fn admitted(counts: &BTreeMap<&str, usize>, typed: usize, threshold: f64) -> BTreeSet<String> {
    if typed == 0 {
        return BTreeSet::new();
    }
    counts
        .iter()
        .filter(|(_, &c)| c as f64 / typed as f64 >= threshold)
        .map(|(t, _)| (*t).to_owned())
        .collect()
}

/// For each KB relation, admits a type for an argument slot when its share
/// among the typed arguments of that slot is at least `threshold`.
pub fn infer_relation_arg_types(kb: &TripleStore, entity_types: &EntityTypes, threshold: f64) -> TypeMap {
    #[derive(Default)]
    struct Tally<'a> {
        subj: BTreeMap<&'a str, usize>,
        subj_typed: usize,
        obj: BTreeMap<&'a str, usize>,
        obj_typed: usize,
    }
    let mut tallies: BTreeMap<RelationId, Tally> = BTreeMap::new();
    for t in kb.with_source(RelationKind::Kb) {
        let tally = tallies.entry(t.relation).or_default();
        if let Some(types) = entity_types.get(&t.subject).filter(|s| !s.is_empty()) {
            tally.subj_typed += 1;
            for ty in types {
                *tally.subj.entry(ty).or_default() += 1;
            }
        }
        if let Some(types) = entity_types.get(&t.object).filter(|s| !s.is_empty()) {
            tally.obj_typed += 1;
            for ty in types {
                *tally.obj.entry(ty).or_default() += 1;
            }
        }
    }
    let relation_arg_types = tallies
        .into_iter()
        .map(|(r, t)| {
            (
                r,
                ArgTypes {
                    subject: admitted(&t.subj, t.subj_typed, threshold),
                    object: admitted(&t.obj, t.obj_typed, threshold),
                },
            )
        })
        .collect();
    TypeMap {
        entity_types: entity_types.clone(),
        relation_arg_types,
    }
}

impl TypeMap {
    fn slot_ok(&self, e: EntityId, allowed: &BTreeSet<String>) -> bool {
        if allowed.is_empty() {
            return true;
        }
        match self.entity_types.get(&e) {
            Some(types) if !types.is_empty() => !types.is_disjoint(allowed),
            _ => true,
        }
    }

    /// False only when a known entity type contradicts a known argument type.
    pub fn allows(&self, (s, o): Pair, r: RelationId) -> bool {
        match self.relation_arg_types.get(&r) {
            Some(arg) => self.slot_ok(s, &arg.subject) && self.slot_ok(o, &arg.object),
            None => true,
        }
    }
}

pub fn type_constraint_filter(candidates: &[(Pair, RelationId)], types: &TypeMap) -> Vec<(Pair, RelationId)> {
    candidates
        .iter()
        .copied()
        .filter(|&(pair, r)| types.allows(pair, r))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::Triple;

    fn kb(s: u32, r: u32, o: u32) -> Triple {
        Triple::new(EntityId(s), RelationId(r), EntityId(o), RelationKind::Kb)
    }

    fn typed(pairs: &[(u32, &str)]) -> EntityTypes {
        let mut m = EntityTypes::new();
        for (e, t) in pairs {
            m.entry(EntityId(*e)).or_default().insert(t.to_string());
        }
        m
    }

    #[test]
    fn homogeneous_subjects() {
        let store: TripleStore = [kb(0, 0, 10), kb(1, 0, 11)].into_iter().collect();
        let tm = infer_relation_arg_types(&store, &typed(&[(0, "person"), (1, "person")]), 0.05);
        let arg = &tm.relation_arg_types[&RelationId(0)];
        assert_eq!(arg.subject, ["person".to_string()].into_iter().collect());
        assert!(arg.object.is_empty());
    }

    #[test]
    fn untyped_is_unconstrained() {
        let store: TripleStore = [kb(0, 0, 10)].into_iter().collect();
        let tm = infer_relation_arg_types(&store, &EntityTypes::new(), 0.05);
        assert_eq!(tm.relation_arg_types[&RelationId(0)], ArgTypes::default());
        assert!(tm.allows((EntityId(5), EntityId(6)), RelationId(0)));
    }

    #[test]
    fn ninety_ten_split_admits_both() {
        let triples: Vec<Triple> = (0..10).map(|i| kb(i, 0, 100)).collect();
        let store: TripleStore = triples.into_iter().collect();
        let mut types: Vec<(u32, &str)> = (0..9).map(|i| (i, "person")).collect();
        types.push((9, "org"));
        let tm = infer_relation_arg_types(&store, &typed(&types), 0.05);
        assert_eq!(tm.relation_arg_types[&RelationId(0)].subject.len(), 2);
        let tm = infer_relation_arg_types(&store, &typed(&types), 0.2);
        assert_eq!(tm.relation_arg_types[&RelationId(0)].subject.len(), 1);
    }

    #[test]
    fn filter_rules() {
        let store: TripleStore = [kb(0, 0, 10), kb(1, 1, 11)].into_iter().collect();
        let tm = infer_relation_arg_types(&store, &typed(&[(0, "person"), (2, "film")]), 0.05);
        let cands = vec![
            ((EntityId(2), EntityId(3)), RelationId(0)), // film subject: dropped
            ((EntityId(4), EntityId(3)), RelationId(0)), // untyped subject: kept
            ((EntityId(2), EntityId(3)), RelationId(1)), // unconstrained relation: kept
        ];
        let kept = type_constraint_filter(&cands, &tm);
        assert_eq!(kept, cands[1..].to_vec());
    }
}
