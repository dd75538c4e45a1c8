use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Dense entity identifier, contiguous from 0 within a [`Vocabulary`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityId(pub u32);

/// Dense relation identifier. Covers both KB relations and OpenIE predicates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelationId(pub u32);

impl EntityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// Whether a relation comes from the ontology or is a free-text predicate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RelationKind {
    Kb,
    OpenIe,
}

impl RelationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RelationKind::Kb => "kb",
            RelationKind::OpenIe => "openie",
        }
    }
}

/// Bidirectional string/id maps for entities and relations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Vocabulary {
    entities: Vec<String>,
    entity_lookup: HashMap<String, EntityId>,
    relations: Vec<(String, RelationKind)>,
    relation_lookup: HashMap<String, RelationId>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entity_lookup.get(name).copied()
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relation_lookup.get(name).copied()
    }

    pub fn intern_entity(&mut self, name: &str) -> EntityId {
        if let Some(&id) = self.entity_lookup.get(name) {
            return id;
        }
        let id = EntityId(self.entities.len() as u32);
        self.entities.push(name.to_owned());
        self.entity_lookup.insert(name.to_owned(), id);
        id
    }

    /// Returns the id for `name`, registering it with `kind` if new.
    /// A known relation must keep its kind.
    pub fn intern_relation(&mut self, name: &str, kind: RelationKind) -> Result<RelationId> {
        if let Some(&id) = self.relation_lookup.get(name) {
            let existing = self.relations[id.index()].1;
            if existing != kind {
                return Err(Error::MixedKind {
                    name: name.to_owned(),
                    existing,
                    requested: kind,
                });
            }
            return Ok(id);
        }
        let id = RelationId(self.relations.len() as u32);
        self.relations.push((name.to_owned(), kind));
        self.relation_lookup.insert(name.to_owned(), id);
        Ok(id)
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        &self.entities[id.index()]
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        &self.relations[id.index()].0
    }

    pub fn relation_kind(&self, id: RelationId) -> RelationKind {
        self.relations[id.index()].1
    }

    pub fn entities(&self) -> impl Iterator<Item = (EntityId, &str)> + '_ {
        self.entities
            .iter()
            .enumerate()
            .map(|(i, s)| (EntityId(i as u32), s.as_str()))
    }

    pub fn relations(&self) -> impl Iterator<Item = (RelationId, &str, RelationKind)> + '_ {
        self.relations
            .iter()
            .enumerate()
            .map(|(i, (s, k))| (RelationId(i as u32), s.as_str(), *k))
    }

    pub fn kb_relations(&self) -> Vec<RelationId> {
        self.relations()
            .filter(|(_, _, k)| *k == RelationKind::Kb)
            .map(|(id, _, _)| id)
            .collect()
    }

    /// Serialized form: one `id<TAB>kind<TAB>string` line per entry, entities
    /// first (kind `entity`), then relations (kind `kb` or `openie`).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (id, name) in self.entities() {
            out.push_str(&format!("{}\tentity\t{}\n", id.0, name));
        }
        for (id, name, kind) in self.relations() {
            out.push_str(&format!("{}\t{}\t{}\n", id.0, kind.as_str(), name));
        }
        out
    }

    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(self.to_text().as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(BufReader::new(file)).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }

    pub fn parse(reader: impl BufRead) -> Result<Self> {
        let mut vocab = Vocabulary::new();
        for (n, line) in reader.lines().enumerate() {
            let line_no = n + 1;
            let line = line.map_err(|e| Error::io("<vocabulary>", e))?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.splitn(3, '\t').collect();
            if fields.len() != 3 {
                return Err(Error::MalformedLine {
                    line: line_no,
                    reason: "expected id, kind and string".into(),
                });
            }
            let id: u32 = fields[0].parse().map_err(|_| Error::MalformedLine {
                line: line_no,
                reason: format!("bad id `{}`", fields[0]),
            })?;
            let expected = match fields[1] {
                "entity" => {
                    let got = vocab.intern_entity(fields[2]);
                    got.0
                }
                "kb" => vocab.intern_relation(fields[2], RelationKind::Kb)?.0,
                "openie" => vocab.intern_relation(fields[2], RelationKind::OpenIe)?.0,
                other => {
                    return Err(Error::MalformedLine {
                        line: line_no,
                        reason: format!("unknown kind `{other}`"),
                    })
                }
            };
            if expected != id {
                return Err(Error::MalformedLine {
                    line: line_no,
                    reason: format!("ids must be dense and unique, got {id} expected {expected}"),
                });
            }
        }
        Ok(vocab)
    }
}
