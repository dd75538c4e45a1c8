use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use crate::store::{EntityId, Pair, RelationId, SplitSpec, Vocabulary};

/// Row-major matrix of `rows × dim` values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Table {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn fill_uniform(&mut self, rng: &mut ChaCha8Rng) {
        if self.data.is_empty() {
            return;
        }
        let bound = 1.0 / (self.dim as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        for x in &mut self.data {
            *x = dist.sample(rng);
        }
    }
}

/// Index of the three gate triples inside the gate row.
pub const GATE_A: usize = 0;
pub const GATE_B: usize = 3;
pub const GATE_ALPHA: usize = 6;

/// Addresses one row of one parameter table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ParamRow {
    Rowless(u32),
    Subj(u32),
    Obj(u32),
    Entity(u32),
    Pair(u32),
    /// `[a1, a2, a3, b1, b2, b3, α1, α2, α3]`
    Gates,
}

impl fmt::Display for ParamRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamRow::Rowless(i) => write!(f, "rowless[{i}]"),
            ParamRow::Subj(i) => write!(f, "subj[{i}]"),
            ParamRow::Obj(i) => write!(f, "obj[{i}]"),
            ParamRow::Entity(i) => write!(f, "entity[{i}]"),
            ParamRow::Pair(i) => write!(f, "pair[{i}]"),
            ParamRow::Gates => f.write_str("gates"),
        }
    }
}

/// All learnable tensors.
///
/// Relation tables are indexed by relation id. Entity and pair tables only
/// have rows for the entities and pairs handed to [`init_params`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub rowless: Table,
    pub subj: Table,
    pub obj: Table,
    pub entity: Table,
    pub entity_slots: BTreeMap<EntityId, u32>,
    pub pair: Table,
    pub pair_slots: BTreeMap<Pair, u32>,
    pub gates: Table,
}

/// Entities and pairs that receive their own parameters.
#[derive(Clone, Debug, Default)]
pub struct ParamScope {
    pub entities: BTreeSet<EntityId>,
    pub pairs: BTreeSet<Pair>,
}

impl ParamScope {
    /// Entities and pairs of the training KB triples.
    pub fn from_split(split: &SplitSpec) -> Self {
        let kb = split.train.with_source(crate::store::RelationKind::Kb);
        let mut scope = ParamScope::default();
        for t in kb {
            scope.entities.insert(t.subject);
            scope.entities.insert(t.object);
            scope.pairs.insert(t.pair());
        }
        scope
    }
}

/// Uniform `[-1/√d, 1/√d]` embeddings; gates start at `a=1, b=0, α=1`.
pub fn init_params(config: &ModelConfig, vocab: &Vocabulary, scope: &ParamScope, seed: u64) -> ModelParams {
    let n_rel = vocab.num_relations();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rowless = Table::zeros(n_rel, config.dim_rowless);
    let mut subj = Table::zeros(n_rel, config.dim_ene);
    let mut obj = Table::zeros(n_rel, config.dim_ene);
    rowless.fill_uniform(&mut rng);
    subj.fill_uniform(&mut rng);
    obj.fill_uniform(&mut rng);

    let (entity_slots, mut entity) = if config.kind.uses_entity_params() {
        let slots: BTreeMap<EntityId, u32> = scope
            .entities
            .iter()
            .enumerate()
            .map(|(i, e)| (*e, i as u32))
            .collect();
        let t = Table::zeros(slots.len(), config.dim_ene);
        (slots, t)
    } else {
        (BTreeMap::new(), Table::zeros(0, config.dim_ene))
    };
    entity.fill_uniform(&mut rng);

    let (pair_slots, mut pair) = if config.kind.uses_pair_params() {
        let slots: BTreeMap<Pair, u32> = scope
            .pairs
            .iter()
            .enumerate()
            .map(|(i, p)| (*p, i as u32))
            .collect();
        let t = Table::zeros(slots.len(), config.dim_rowless);
        (slots, t)
    } else {
        (BTreeMap::new(), Table::zeros(0, config.dim_rowless))
    };
    pair.fill_uniform(&mut rng);

    let mut gates = Table::zeros(1, 9);
    for i in 0..3 {
        gates.data[GATE_A + i] = 1.0;
        gates.data[GATE_B + i] = 0.0;
        gates.data[GATE_ALPHA + i] = 1.0;
    }

    ModelParams {
        rowless,
        subj,
        obj,
        entity,
        entity_slots,
        pair,
        pair_slots,
        gates,
    }
}

impl ModelParams {
    /// Same shapes and slots, all values zero.
    pub fn zeros_like(&self) -> Self {
        let z = |t: &Table| Table::zeros(t.rows, t.dim);
        ModelParams {
            rowless: z(&self.rowless),
            subj: z(&self.subj),
            obj: z(&self.obj),
            entity: z(&self.entity),
            entity_slots: self.entity_slots.clone(),
            pair: z(&self.pair),
            pair_slots: self.pair_slots.clone(),
            gates: z(&self.gates),
        }
    }

    pub fn table(&self, row: ParamRow) -> (&Table, usize) {
        match row {
            ParamRow::Rowless(i) => (&self.rowless, i as usize),
            ParamRow::Subj(i) => (&self.subj, i as usize),
            ParamRow::Obj(i) => (&self.obj, i as usize),
            ParamRow::Entity(i) => (&self.entity, i as usize),
            ParamRow::Pair(i) => (&self.pair, i as usize),
            ParamRow::Gates => (&self.gates, 0),
        }
    }

    pub fn row(&self, row: ParamRow) -> &[f64] {
        let (t, i) = self.table(row);
        t.row(i)
    }

    pub fn row_mut(&mut self, row: ParamRow) -> &mut [f64] {
        match row {
            ParamRow::Rowless(i) => self.rowless.row_mut(i as usize),
            ParamRow::Subj(i) => self.subj.row_mut(i as usize),
            ParamRow::Obj(i) => self.obj.row_mut(i as usize),
            ParamRow::Entity(i) => self.entity.row_mut(i as usize),
            ParamRow::Pair(i) => self.pair.row_mut(i as usize),
            ParamRow::Gates => self.gates.row_mut(0),
        }
    }

    /// Every addressable row, in a fixed order.
    pub fn all_rows(&self) -> Vec<ParamRow> {
        let mut rows = Vec::new();
        rows.extend((0..self.rowless.rows as u32).map(ParamRow::Rowless));
        rows.extend((0..self.subj.rows as u32).map(ParamRow::Subj));
        rows.extend((0..self.obj.rows as u32).map(ParamRow::Obj));
        rows.extend((0..self.entity.rows as u32).map(ParamRow::Entity));
        rows.extend((0..self.pair.rows as u32).map(ParamRow::Pair));
        rows.push(ParamRow::Gates);
        rows
    }

    pub fn entity_slot(&self, e: EntityId) -> Option<u32> {
        self.entity_slots.get(&e).copied()
    }

    pub fn pair_slot(&self, pair: Pair) -> Option<u32> {
        self.pair_slots.get(&pair).copied()
    }

    #[inline]
    pub fn rowless_of(&self, r: RelationId) -> &[f64] {
        self.rowless.row(r.index())
    }

    #[inline]
    pub fn subj_of(&self, r: RelationId) -> &[f64] {
        self.subj.row(r.index())
    }

    #[inline]
    pub fn obj_of(&self, r: RelationId) -> &[f64] {
        self.obj.row(r.index())
    }

    pub fn gate_a(&self, i: usize) -> f64 {
        self.gates.data[GATE_A + i]
    }

    pub fn gate_b(&self, i: usize) -> f64 {
        self.gates.data[GATE_B + i]
    }

    pub fn gate_alpha(&self, i: usize) -> f64 {
        self.gates.data[GATE_ALPHA + i]
    }

    pub fn is_finite(&self) -> bool {
        [&self.rowless, &self.subj, &self.obj, &self.entity, &self.pair, &self.gates]
            .iter()
            .all(|t| t.data.iter().all(|x| x.is_finite()))
    }

    /// Bitwise equality, distinguishing `-0.0` from `0.0`.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        let tables = |p: &Self| [p.rowless.clone(), p.subj.clone(), p.obj.clone(), p.entity.clone(), p.pair.clone(), p.gates.clone()];
        self.entity_slots == other.entity_slots
            && self.pair_slots == other.pair_slots
            && tables(self).iter().zip(tables(other).iter()).all(|(a, b)| {
                a.rows == b.rows
                    && a.dim == b.dim
                    && a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }
}

/// Sparse gradient: only rows that were touched are present.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradients {
    rows: BTreeMap<ParamRow, Vec<f64>>,
}

impl Gradients {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn row_mut(&mut self, row: ParamRow, dim: usize) -> &mut [f64] {
        self.rows.entry(row).or_insert_with(|| vec![0.0; dim])
    }

    /// `grad[row] += coeff * v`
    pub fn axpy(&mut self, row: ParamRow, coeff: f64, v: &[f64]) {
        let g = self.row_mut(row, v.len());
        for (gi, vi) in g.iter_mut().zip(v) {
            *gi += coeff * vi;
        }
    }

    pub fn add_at(&mut self, row: ParamRow, dim: usize, idx: usize, value: f64) {
        self.row_mut(row, dim)[idx] += value;
    }

    pub fn get(&self, row: ParamRow) -> Option<&[f64]> {
        self.rows.get(&row).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamRow, &[f64])> + '_ {
        self.rows.iter().map(|(r, g)| (*r, g.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.rows.values_mut() {
            for x in g {
                *x *= factor;
            }
        }
    }

    /// Adds `other` into `self`, row by row in key order.
    pub fn merge(&mut self, other: &Gradients) {
        for (row, g) in other.iter() {
            self.axpy(row, 1.0, g);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.rows
            .values()
            .flat_map(|g| g.iter())
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}
