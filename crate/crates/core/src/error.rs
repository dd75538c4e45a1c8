use std::path::PathBuf;

use crate::store::{EntityId, RelationId, RelationKind};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("relation `{name}` is already known as {existing:?}, cannot reuse it as {requested:?}")]
    MixedKind {
        name: String,
        existing: RelationKind,
        requested: RelationKind,
    },

    #[error("unknown {what} `{name}`")]
    Unknown { what: &'static str, name: String },

    #[error("no eligible entity pair for hold-out (need KB pairs that also carry OpenIE predicates)")]
    NoEligiblePair,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("entity pair ({}, {}) was not observed in training", .0.0, .0.1)]
    UnseenPair((EntityId, EntityId)),

    #[error("entity {0} has no trained embedding")]
    UnseenEntity(EntityId),

    #[error("entity pair ({}, {}) shares no predicates", .0.0, .0.1)]
    EmptyPairEvidence((EntityId, EntityId)),

    #[error("non-finite gradient for parameter {0}")]
    NonFiniteGradient(String),

    #[error("no observed predicates given")]
    EmptyObserved,

    #[error("no positive labels")]
    NoPositives,

    #[error("report has no evaluated relations")]
    EmptyReport,

    #[error("checkpoint version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("infeasible world configuration: {0}")]
    InfeasibleWorld(String),

    #[error("relation {0} is not a KB relation")]
    NotKbRelation(RelationId),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
