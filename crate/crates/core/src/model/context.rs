use rand::Rng;

use super::params::ModelParams;
use crate::store::{EntityId, NeighborIndex, RelationId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Subject,
    Object,
}

/// The relational evidence a scorer sees for one `(s, o)` pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairContext {
    pub subject: EntityId,
    pub object: EntityId,
    /// `R(s,o)`, sorted by relation id.
    pub pair_relations: Vec<RelationId>,
    /// `R(s,·)` with multiplicity.
    pub subject_neighbors: Vec<RelationId>,
    /// `R(·,o)` with multiplicity.
    pub object_neighbors: Vec<RelationId>,
}

/// Uniform subset of at most `cap` items, keeping the original order.
pub fn sample_capped<T: Copy>(items: &[T], cap: usize, rng: &mut impl Rng) -> Vec<T> {
    if items.len() <= cap {
        return items.to_vec();
    }
    let mut picked = rand::seq::index::sample(rng, items.len(), cap).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| items[i]).collect()
}

fn remove_one(list: &mut Vec<RelationId>, r: RelationId) {
    if let Some(pos) = list.iter().position(|&x| x == r) {
        list.remove(pos);
    }
}

impl PairContext {
    /// Full, uncapped evidence as used at evaluation time.
    pub fn full(index: &NeighborIndex, s: EntityId, o: EntityId) -> Self {
        Self {
            subject: s,
            object: o,
            pair_relations: index.pair_relations(s, o).to_vec(),
            subject_neighbors: index.subject_neighbors(s).to_vec(),
            object_neighbors: index.object_neighbors(o).to_vec(),
        }
    }

    /// Training-time evidence: optionally drops the triple `(s, exclude, o)`
    /// itself, then caps pair predicates and neighborhoods by uniform
    /// sampling without replacement.
    pub fn sampled(
        index: &NeighborIndex,
        s: EntityId,
        o: EntityId,
        exclude: Option<RelationId>,
        max_pair: usize,
        max_neighbors: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let mut ctx = Self::full(index, s, o);
        if let Some(r) = exclude {
            if ctx.pair_relations.contains(&r) {
                remove_one(&mut ctx.pair_relations, r);
                remove_one(&mut ctx.subject_neighbors, r);
                remove_one(&mut ctx.object_neighbors, r);
            }
        }
        ctx.pair_relations = sample_capped(&ctx.pair_relations, max_pair, rng);
        ctx.subject_neighbors = sample_capped(&ctx.subject_neighbors, max_neighbors, rng);
        ctx.object_neighbors = sample_capped(&ctx.object_neighbors, max_neighbors, rng);
        ctx
    }

    pub fn neighbors(&self, role: Role) -> &[RelationId] {
        match role {
            Role::Subject => &self.subject_neighbors,
            Role::Object => &self.object_neighbors,
        }
    }
}

/// Average of the role embeddings over `neighbors`; zero vector if empty.
pub fn mean_role_embedding(params: &ModelParams, role: Role, neighbors: &[RelationId]) -> Vec<f64> {
    let table = match role {
        Role::Subject => &params.subj,
        Role::Object => &params.obj,
    };
    let mut acc = vec![0.0; table.dim];
    if neighbors.is_empty() {
        return acc;
    }
    for r in neighbors {
        for (a, x) in acc.iter_mut().zip(table.row(r.index())) {
            *a += x;
        }
    }
    let n = neighbors.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Average-pooled neighborhood embedding of `e` in `role`, over at most
/// `cap` sampled neighbors (`None` uses the whole neighborhood).
pub fn agg_neighborhood(
    params: &ModelParams,
    index: &NeighborIndex,
    e: EntityId,
    role: Role,
    cap: Option<usize>,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let list = match role {
        Role::Subject => index.subject_neighbors(e),
        Role::Object => index.object_neighbors(e),
    };
    match cap {
        Some(c) => mean_role_embedding(params, role, &sample_capped(list, c, rng)),
        None => mean_role_embedding(params, role, list),
    }
}
