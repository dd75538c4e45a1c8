use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Which scoring function a model uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    /// Pair embedding dotted with the relation embedding.
    F,
    /// Entity embeddings dotted with role-specific relation embeddings.
    E,
    /// Sum of the F and E scores.
    FE,
    /// Attention-pooled shared predicates, no entity parameters.
    Rowless,
    /// Entity neighborhood encoder: average-pooled neighborhood per role.
    Ene,
    /// Gated combination of the attention score and both ENE scores.
    OpenKi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttentionMode {
    /// Hard attention on the predicate with the largest query logit.
    MaxR,
    Query,
    Neighbor,
    Dual,
}

impl ModelKind {
    pub fn uses_pair_params(self) -> bool {
        matches!(self, ModelKind::F | ModelKind::FE)
    }

    pub fn uses_entity_params(self) -> bool {
        matches!(self, ModelKind::E | ModelKind::FE)
    }

    pub fn uses_attention(self) -> bool {
        matches!(self, ModelKind::Rowless | ModelKind::OpenKi)
    }

    pub fn uses_neighborhoods(self) -> bool {
        matches!(self, ModelKind::Ene | ModelKind::OpenKi)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::F => "F",
            ModelKind::E => "E",
            ModelKind::FE => "F+E",
            ModelKind::Rowless => "Rowless",
            ModelKind::Ene => "ENE",
            ModelKind::OpenKi => "OpenKI",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "f" => Ok(ModelKind::F),
            "e" => Ok(ModelKind::E),
            "f+e" | "fe" => Ok(ModelKind::FE),
            "rowless" => Ok(ModelKind::Rowless),
            "ene" => Ok(ModelKind::Ene),
            "openki" => Ok(ModelKind::OpenKi),
            _ => Err(Error::InvalidConfig(format!("unknown model `{s}`"))),
        }
    }
}

impl AttentionMode {
    pub fn name(self) -> &'static str {
        match self {
            AttentionMode::MaxR => "maxr",
            AttentionMode::Query => "query",
            AttentionMode::Neighbor => "neighbor",
            AttentionMode::Dual => "dual",
        }
    }

    pub const ALL: [AttentionMode; 4] = [
        AttentionMode::MaxR,
        AttentionMode::Query,
        AttentionMode::Neighbor,
        AttentionMode::Dual,
    ];
}

impl fmt::Display for AttentionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttentionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "maxr" => Ok(AttentionMode::MaxR),
            "query" => Ok(AttentionMode::Query),
            "neighbor" | "neighbour" => Ok(AttentionMode::Neighbor),
            "dual" => Ok(AttentionMode::Dual),
            _ => Err(Error::InvalidConfig(format!("unknown attention mode `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub attention: AttentionMode,
    pub dim_rowless: usize,
    pub dim_ene: usize,
    /// Cap on predicates per pair during training.
    pub max_pair_predicates: usize,
    /// Cap on neighbors per entity during training.
    pub max_neighbors: usize,
    pub margin: f64,
    /// Drop the positive triple from its own training context.
    pub exclude_self: bool,
    /// Keep OpenIE triples of held-out pairs out of entity neighborhoods.
    #[serde(default)]
    pub hide_held_out_neighbors: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::OpenKi,
            attention: AttentionMode::Dual,
            dim_rowless: 25,
            dim_ene: 12,
            max_pair_predicates: 8,
            max_neighbors: 16,
            margin: 1.0,
            exclude_self: true,
            hide_held_out_neighbors: false,
        }
    }
}

impl ModelConfig {
    pub fn new(kind: ModelKind, attention: AttentionMode) -> Self {
        Self {
            kind,
            attention,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.dim_rowless == 0 || self.dim_ene == 0 {
            return Err(Error::InvalidConfig("embedding dimensions must be positive".into()));
        }
        if self.max_pair_predicates == 0 || self.max_neighbors == 0 {
            return Err(Error::InvalidConfig("sampling caps must be at least 1".into()));
        }
        if !(self.margin > 0.0) {
            return Err(Error::InvalidConfig("margin must be positive".into()));
        }
        Ok(())
    }

    /// Short label such as `OpenKI/dual` or `ENE`.
    pub fn label(&self) -> String {
        if self.kind.uses_attention() {
            format!("{}/{}", self.kind, self.attention)
        } else {
            self.kind.to_string()
        }
    }
}
