//! Data model: vocabularies, triple stores, neighborhoods, linking and splits.

mod index;
mod link;
mod split;
mod triples;
mod vocab;

pub use index::NeighborIndex;
pub use link::{link_mentions, normalize_mention, read_raw_triples, RawTriple};
pub use split::{eligible_pairs, pair_hash, split_holdout, SplitSpec};
pub use triples::{ingest_reader, ingest_triples, IngestStats, Pair, Triple, TripleStore};
pub use vocab::{EntityId, RelationId, RelationKind, Vocabulary};
