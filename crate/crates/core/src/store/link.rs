use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::triples::{Triple, TripleStore};
use super::vocab::{EntityId, RelationKind, Vocabulary};
use crate::error::{Error, Result};

/// An extraction over surface strings, before entity linking.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawTriple {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl RawTriple {
    pub fn new(subject: &str, predicate: &str, object: &str) -> Self {
        Self {
            subject: subject.to_owned(),
            predicate: predicate.to_owned(),
            object: object.to_owned(),
        }
    }
}

/// Case-folds, trims and collapses internal whitespace.
pub fn normalize_mention(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn read_raw_triples(path: &Path) -> Result<Vec<RawTriple>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
        if f.len() != 3 {
            return Err(Error::MalformedLine {
                line: n + 1,
                reason: format!("expected 3 tab-separated fields, got {}", f.len()),
            });
        }
        out.push(RawTriple::new(f[0], f[1], f[2]));
    }
    Ok(out)
}

struct Linker<'a> {
    kb: &'a TripleStore,
    candidates: HashMap<String, Vec<EntityId>>,
    degree: HashMap<EntityId, usize>,
    fresh: HashMap<String, EntityId>,
}

impl<'a> Linker<'a> {
    fn new(kb: &'a TripleStore, vocab: &Vocabulary) -> Self {
        let mut degree: HashMap<EntityId, usize> = HashMap::new();
        for t in kb.iter() {
            *degree.entry(t.subject).or_default() += 1;
            *degree.entry(t.object).or_default() += 1;
        }
        let mut candidates: HashMap<String, Vec<EntityId>> = HashMap::new();
        let mut fresh = HashMap::new();
        for (id, name) in vocab.entities() {
            let key = normalize_mention(name);
            if degree.contains_key(&id) {
                candidates.entry(key).or_default().push(id);
            } else {
                fresh.entry(key).or_insert(id);
            }
        }
        Self {
            kb,
            candidates,
            degree,
            fresh,
        }
    }

    fn candidates(&self, mention: &str) -> &[EntityId] {
        self.candidates
            .get(mention)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Highest KB degree, ties to the lowest id.
    fn most_common(&self, cands: &[EntityId]) -> Option<EntityId> {
        cands
            .iter()
            .copied()
            .max_by(|a, b| self.degree[a].cmp(&self.degree[b]).then(b.cmp(a)))
    }

    fn link_pair(&self, subj: &str, obj: &str) -> (Option<EntityId>, Option<EntityId>) {
        let cs = self.candidates(subj);
        let co = self.candidates(obj);
        let related = cs
            .iter()
            .flat_map(|&s| co.iter().map(move |&o| (s, o)))
            .filter(|&(s, o)| !self.kb.relations_between(s, o).is_empty())
            .max_by(|a, b| {
                let da = self.degree[&a.0] + self.degree[&a.1];
                let db = self.degree[&b.0] + self.degree[&b.1];
                da.cmp(&db).then(b.cmp(a))
            });
        match related {
            Some((s, o)) => (Some(s), Some(o)),
            None => (self.most_common(cs), self.most_common(co)),
        }
    }

    fn resolve(&mut self, linked: Option<EntityId>, mention: &str, vocab: &mut Vocabulary) -> EntityId {
        if let Some(id) = linked {
            return id;
        }
        if let Some(&id) = self.fresh.get(mention) {
            return id;
        }
        let id = vocab.intern_entity(mention);
        self.fresh.insert(mention.to_owned(), id);
        id
    }
}

/// Links surface-string extractions to entity ids by exact normalized match
/// against entities participating in `kb`.
///
/// A mention pair goes to a candidate pair that already shares a KB relation
/// when one exists; otherwise each mention goes to its highest-degree
/// candidate. Mentions without candidates become new entities keyed by their
/// normalized text.
pub fn link_mentions(
    extractions: &[RawTriple],
    kb: &TripleStore,
    vocab: &mut Vocabulary,
) -> Result<TripleStore> {
    let mut linker = Linker::new(kb, vocab);
    let mut memo: BTreeMap<(String, String), (Option<EntityId>, Option<EntityId>)> = BTreeMap::new();
    let mut out = TripleStore::new();
    for raw in extractions {
        let subj = normalize_mention(&raw.subject);
        let obj = normalize_mention(&raw.object);
        let (ls, lo) = *memo
            .entry((subj.clone(), obj.clone()))
            .or_insert_with(|| linker.link_pair(&subj, &obj));
        let s = linker.resolve(ls, &subj, vocab);
        let o = linker.resolve(lo, &obj, vocab);
        let p = vocab.intern_relation(raw.predicate.trim(), RelationKind::OpenIe)?;
        out.insert(Triple::new(s, p, o, RelationKind::OpenIe));
    }
    Ok(out)
}
