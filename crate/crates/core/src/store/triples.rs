use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::vocab::{EntityId, RelationId, RelationKind, Vocabulary};
use crate::error::{Error, Result};

/// An ordered (subject, object) entity pair.
pub type Pair = (EntityId, EntityId);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: EntityId,
    pub source: RelationKind,
}

impl Triple {
    pub fn new(subject: EntityId, relation: RelationId, object: EntityId, source: RelationKind) -> Self {
        Self {
            subject,
            relation,
            object,
            source,
        }
    }

    pub fn pair(&self) -> Pair {
        (self.subject, self.object)
    }
}

/// Deduplicated triple set with a (subject, object) lookup.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TripleStore {
    triples: BTreeSet<Triple>,
    by_pair: BTreeMap<Pair, Vec<RelationId>>,
}

impl TripleStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a triple, returning `false` if it was already present.
    pub fn insert(&mut self, triple: Triple) -> bool {
        if !self.triples.insert(triple) {
            return false;
        }
        let rels = self.by_pair.entry(triple.pair()).or_default();
        let pos = rels.binary_search(&triple.relation).unwrap_or_else(|p| p);
        rels.insert(pos, triple.relation);
        true
    }

    pub fn contains(&self, s: EntityId, r: RelationId, o: EntityId) -> bool {
        self.relations_between(s, o).binary_search(&r).is_ok()
    }

    /// Sorted relations observed between `s` and `o` (both sources).
    pub fn relations_between(&self, s: EntityId, o: EntityId) -> &[RelationId] {
        self.by_pair.get(&(s, o)).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&Pair, &[RelationId])> + '_ {
        self.by_pair.iter().map(|(p, r)| (p, r.as_slice()))
    }

    pub fn has_pair(&self, pair: Pair) -> bool {
        self.by_pair.contains_key(&pair)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Triple> + '_ {
        self.triples.iter()
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn with_source(&self, source: RelationKind) -> impl Iterator<Item = &Triple> + '_ {
        self.triples.iter().filter(move |t| t.source == source)
    }

    pub fn entities(&self) -> BTreeSet<EntityId> {
        self.triples
            .iter()
            .flat_map(|t| [t.subject, t.object])
            .collect()
    }

    /// Triples for which `keep` holds, as a new store.
    pub fn filtered(&self, mut keep: impl FnMut(&Triple) -> bool) -> TripleStore {
        self.triples.iter().copied().filter(|t| keep(t)).collect()
    }

    pub fn extend_from(&mut self, other: &TripleStore) {
        for t in other.iter() {
            self.insert(*t);
        }
    }

    pub fn write_tsv(&self, path: &Path, vocab: &Vocabulary) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for t in &self.triples {
            writeln!(
                w,
                "{}\t{}\t{}",
                vocab.entity_name(t.subject),
                vocab.relation_name(t.relation),
                vocab.entity_name(t.object)
            )
            .map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a TSV whose relations must already be in `vocab`; the source tag
    /// of each triple is the vocabulary kind of its relation.
    pub fn read_tsv(path: &Path, vocab: &mut Vocabulary) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut store = TripleStore::new();
        for (_, fields) in tsv_lines(BufReader::new(file), path) {
            let [s, r, o] = fields?;
            let rel = vocab.relation_id(&r).ok_or(Error::Unknown {
                what: "relation",
                name: r.clone(),
            })?;
            let kind = vocab.relation_kind(rel);
            let s = vocab.intern_entity(&s);
            let o = vocab.intern_entity(&o);
            store.insert(Triple::new(s, rel, o, kind));
        }
        Ok(store)
    }
}

impl FromIterator<Triple> for TripleStore {
    fn from_iter<I: IntoIterator<Item = Triple>>(iter: I) -> Self {
        let mut store = TripleStore::new();
        for t in iter {
            store.insert(t);
        }
        store
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct IngestStats {
    pub lines: usize,
    pub triples: usize,
    pub duplicates: usize,
    pub new_entities: usize,
    pub new_relations: usize,
}

/// Splits a TSV stream into 3-field records, skipping blank lines.
fn tsv_lines<'a>(
    reader: impl BufRead + 'a,
    path: &'a Path,
) -> impl Iterator<Item = (usize, Result<[String; 3]>)> + 'a {
    reader.lines().enumerate().filter_map(move |(n, line)| {
        let line_no = n + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some((line_no, Err(Error::io(path, e)))),
        };
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            return None;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 || fields.iter().any(|f| f.trim().is_empty()) {
            return Some((
                line_no,
                Err(Error::MalformedLine {
                    line: line_no,
                    reason: format!("expected 3 non-empty tab-separated fields, got {}", fields.len()),
                }),
            ));
        }
        Some((
            line_no,
            Ok([
                fields[0].to_owned(),
                fields[1].to_owned(),
                fields[2].to_owned(),
            ]),
        ))
    })
}

/// Parses `subject\trelation\tobject` lines, registering new strings in `vocab`.
pub fn ingest_reader(
    reader: impl BufRead,
    kind: RelationKind,
    vocab: &mut Vocabulary,
) -> Result<(TripleStore, IngestStats)> {
    let mut stats = IngestStats::default();
    let mut store = TripleStore::new();
    let entities_before = vocab.num_entities();
    let relations_before = vocab.num_relations();
    let path = Path::new("<input>");
    for (_, fields) in tsv_lines(reader, path) {
        let [s, r, o] = fields?;
        stats.lines += 1;
        let rel = vocab.intern_relation(&r, kind)?;
        let s = vocab.intern_entity(&s);
        let o = vocab.intern_entity(&o);
        if !store.insert(Triple::new(s, rel, o, kind)) {
            stats.duplicates += 1;
        }
    }
    stats.triples = store.len();
    stats.new_entities = vocab.num_entities() - entities_before;
    stats.new_relations = vocab.num_relations() - relations_before;
    Ok((store, stats))
}

pub fn ingest_triples(
    path: &Path,
    kind: RelationKind,
    vocab: &mut Vocabulary,
) -> Result<(TripleStore, IngestStats)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(BufReader::new(file), kind, vocab).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ingest(text: &str, kind: RelationKind, vocab: &mut Vocabulary) -> Result<(TripleStore, IngestStats)> {
        ingest_reader(text.as_bytes(), kind, vocab)
    }

    #[test]
    fn three_distinct_lines() {
        let mut v = Vocabulary::new();
        let (store, stats) = ingest("a\tr\tb\nb\tr\tc\na\tq\tc\n", RelationKind::Kb, &mut v).unwrap();
        assert_eq!(store.len(), 3);
        assert_eq!(stats.lines, 3);
        assert_eq!(stats.new_entities, 3);
        assert_eq!(stats.new_relations, 2);
    }

    #[test]
    fn repeated_line_collapses() {
        let mut v = Vocabulary::new();
        let (store, stats) = ingest("a\tr\tb\na\tr\tb\n", RelationKind::Kb, &mut v).unwrap();
        assert_eq!(store.len(), 1);
        assert_eq!(stats.duplicates, 1);
    }

    #[test]
    fn two_fields_is_malformed() {
        let mut v = Vocabulary::new();
        let err = ingest("a\tr\n", RelationKind::Kb, &mut v).unwrap_err();
        assert_eq!(err.to_string().split(':').next().unwrap(), "malformed line 1");
    }

    #[test]
    fn mixed_kind_on_known_relation() {
        let mut v = Vocabulary::new();
        ingest("a\tr\tb\n", RelationKind::Kb, &mut v).unwrap();
        let err = ingest("a\tr\tc\n", RelationKind::OpenIe, &mut v).unwrap_err();
        assert!(matches!(err, Error::MixedKind { .. }));
    }

    #[test]
    fn pair_lookup_returns_all_relations() {
        let mut v = Vocabulary::new();
        let (store, _) = ingest("a\tr\tb\na\tq\tb\nb\tr\ta\n", RelationKind::Kb, &mut v).unwrap();
        let a = v.entity_id("a").unwrap();
        let b = v.entity_id("b").unwrap();
        assert_eq!(store.relations_between(a, b).len(), 2);
        assert_eq!(store.relations_between(b, a).len(), 1);
        assert!(store.relations_between(a, a).is_empty());
    }
}
