use serde::Serialize;

use super::config::{AttentionMode, ModelConfig, ModelKind};
use super::context::{mean_role_embedding, PairContext, Role};
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::store::{EntityId, NeighborIndex, Pair, RelationId};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Softmax with the max logit subtracted first.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// First index of the maximum; pair relations are sorted, so this is the
/// lowest relation id among ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// `v_{s,o} · v_p`
pub fn score_f(params: &ModelParams, pair: Pair, p: RelationId) -> Result<f64> {
    let slot = params.pair_slot(pair).ok_or(Error::UnseenPair(pair))?;
    Ok(dot(params.pair.row(slot as usize), params.rowless_of(p)))
}

fn entity_row(params: &ModelParams, e: EntityId) -> Result<&[f64]> {
    let slot = params.entity_slot(e).ok_or(Error::UnseenEntity(e))?;
    Ok(params.entity.row(slot as usize))
}

/// `v_s · v_p^subj + v_o · v_p^obj`
pub fn score_e(params: &ModelParams, s: EntityId, o: EntityId, p: RelationId) -> Result<f64> {
    let vs = entity_row(params, s)?;
    let vo = entity_row(params, o)?;
    Ok(dot(vs, params.subj_of(p)) + dot(vo, params.obj_of(p)))
}

/// Subject and object neighborhood scores for relation `p`.
pub fn score_ene(params: &ModelParams, ctx: &PairContext, p: RelationId) -> (f64, f64) {
    let agg_s = mean_role_embedding(params, Role::Subject, &ctx.subject_neighbors);
    let agg_o = mean_role_embedding(params, Role::Object, &ctx.object_neighbors);
    (dot(&agg_s, params.subj_of(p)), dot(&agg_o, params.obj_of(p)))
}

/// Intermediate values of the attention score, shared with the backward pass.
#[derive(Clone, Debug)]
pub(crate) struct AttentionForward {
    /// `v_q · v_p` per pair predicate.
    pub query_logits: Vec<f64>,
    pub weights: Vec<f64>,
    pub score: f64,
}

pub(crate) fn attention_forward(
    params: &ModelParams,
    ctx: &PairContext,
    q: RelationId,
    mode: AttentionMode,
    agg_s: &[f64],
    agg_o: &[f64],
) -> Result<AttentionForward> {
    if ctx.pair_relations.is_empty() {
        return Err(Error::EmptyPairEvidence((ctx.subject, ctx.object)));
    }
    let vq = params.rowless_of(q);
    let query_logits: Vec<f64> = ctx
        .pair_relations
        .iter()
        .map(|&p| dot(params.rowless_of(p), vq))
        .collect();
    let neighbor_logits: Vec<f64> = match mode {
        AttentionMode::Neighbor | AttentionMode::Dual => ctx
            .pair_relations
            .iter()
            .map(|&p| dot(agg_s, params.subj_of(p)) + dot(agg_o, params.obj_of(p)))
            .collect(),
        _ => Vec::new(),
    };
    let weights = match mode {
        AttentionMode::Query => softmax(&query_logits),
        AttentionMode::Neighbor => softmax(&neighbor_logits),
        AttentionMode::Dual => {
            let wq = softmax(&query_logits);
            let wn = softmax(&neighbor_logits);
            let prod: Vec<f64> = wq.iter().zip(&wn).map(|(a, b)| a * b).collect();
            let z: f64 = prod.iter().sum();
            prod.into_iter().map(|x| x / z).collect()
        }
        AttentionMode::MaxR => {
            let mut w = vec![0.0; query_logits.len()];
            w[argmax(&query_logits)] = 1.0;
            w
        }
    };
    let score = weights.iter().zip(&query_logits).map(|(w, c)| w * c).sum();
    Ok(AttentionForward {
        query_logits,
        weights,
        score,
    })
}

fn aggregates(params: &ModelParams, ctx: &PairContext) -> (Vec<f64>, Vec<f64>) {
    (
        mean_role_embedding(params, Role::Subject, &ctx.subject_neighbors),
        mean_role_embedding(params, Role::Object, &ctx.object_neighbors),
    )
}

/// Weights over `ctx.pair_relations` for query relation `q`.
pub fn attention_weights(
    params: &ModelParams,
    ctx: &PairContext,
    q: RelationId,
    mode: AttentionMode,
) -> Result<Vec<f64>> {
    let (agg_s, agg_o) = aggregates(params, ctx);
    Ok(attention_forward(params, ctx, q, mode, &agg_s, &agg_o)?.weights)
}

/// `(Σ_p w_p v_p) · v_q`
pub fn score_att(params: &ModelParams, ctx: &PairContext, q: RelationId, mode: AttentionMode) -> Result<f64> {
    let (agg_s, agg_o) = aggregates(params, ctx);
    Ok(attention_forward(params, ctx, q, mode, &agg_s, &agg_o)?.score)
}

/// Parts of the joint score.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoreBreakdown {
    /// Attention score; `None` when the pair shares no predicates and the
    /// term is dropped.
    pub s_att: Option<f64>,
    pub s_ene_subj: f64,
    pub s_ene_obj: f64,
    /// `f_i(X_i) = σ(a_i X_i + b_i)` for the three terms (0 for a dropped term).
    pub normalized: [f64; 3],
    /// `ReLU(α_i)`.
    pub gate_weights: [f64; 3],
    pub total: f64,
    pub attention_weights: Vec<(RelationId, f64)>,
}

impl ScoreBreakdown {
    pub fn recompute_total(&self) -> f64 {
        (0..3).map(|i| self.normalized[i] * self.gate_weights[i]).sum()
    }
}

pub fn score_openki(params: &ModelParams, ctx: &PairContext, p: RelationId, mode: AttentionMode) -> ScoreBreakdown {
    let (agg_s, agg_o) = aggregates(params, ctx);
    let att = attention_forward(params, ctx, p, mode, &agg_s, &agg_o).ok();
    let s_subj = dot(&agg_s, params.subj_of(p));
    let s_obj = dot(&agg_o, params.obj_of(p));
    let inputs = [att.as_ref().map(|a| a.score), Some(s_subj), Some(s_obj)];
    let mut normalized = [0.0; 3];
    let mut gate_weights = [0.0; 3];
    let mut total = 0.0;
    for i in 0..3 {
        gate_weights[i] = relu(params.gate_alpha(i));
        if let Some(x) = inputs[i] {
            normalized[i] = sigmoid(params.gate_a(i) * x + params.gate_b(i));
            total += normalized[i] * gate_weights[i];
        }
    }
    let attention_weights = match &att {
        Some(a) => ctx.pair_relations.iter().copied().zip(a.weights.iter().copied()).collect(),
        None => Vec::new(),
    };
    ScoreBreakdown {
        s_att: inputs[0],
        s_ene_subj: s_subj,
        s_ene_obj: s_obj,
        normalized,
        gate_weights,
        total,
        attention_weights,
    }
}

/// Score of relation `p` for the pair in `ctx` under `config.kind`.
///
/// Errors follow each model's contract: F needs a trained pair, E needs
/// trained entities, Rowless needs shared predicates. ENE and OpenKI always
/// succeed.
pub fn score(params: &ModelParams, config: &ModelConfig, ctx: &PairContext, p: RelationId) -> Result<f64> {
    let pair = (ctx.subject, ctx.object);
    match config.kind {
        ModelKind::F => score_f(params, pair, p),
        ModelKind::E => score_e(params, ctx.subject, ctx.object, p),
        ModelKind::FE => Ok(score_f(params, pair, p)? + score_e(params, ctx.subject, ctx.object, p)?),
        ModelKind::Rowless => score_att(params, ctx, p, config.attention),
        ModelKind::Ene => {
            let (a, b) = score_ene(params, ctx, p);
            Ok(a + b)
        }
        ModelKind::OpenKi => Ok(score_openki(params, ctx, p, config.attention).total),
    }
}

/// [`score`] with the documented fallback of 0 for pairs a model cannot
/// score (unseen entity or pair, no shared predicates).
pub fn score_or_fallback(params: &ModelParams, config: &ModelConfig, ctx: &PairContext, p: RelationId) -> f64 {
    match score(params, config, ctx, p) {
        Ok(s) => s,
        Err(Error::UnseenEntity(_) | Error::UnseenPair(_) | Error::EmptyPairEvidence(_)) => 0.0,
        Err(e) => unreachable!("scoring cannot fail with {e}"),
    }
}

/// A trained model bound to the neighborhood index it scores against.
#[derive(Clone, Copy)]
pub struct Model<'a> {
    pub params: &'a ModelParams,
    pub config: &'a ModelConfig,
    pub index: &'a NeighborIndex,
}

impl<'a> Model<'a> {
    pub fn new(params: &'a ModelParams, config: &'a ModelConfig, index: &'a NeighborIndex) -> Self {
        Self { params, config, index }
    }

    pub fn context(&self, s: EntityId, o: EntityId) -> PairContext {
        PairContext::full(self.index, s, o)
    }

    pub fn score(&self, s: EntityId, o: EntityId, p: RelationId) -> Result<f64> {
        score(self.params, self.config, &self.context(s, o), p)
    }

    pub fn breakdown(&self, s: EntityId, o: EntityId, p: RelationId) -> ScoreBreakdown {
        score_openki(self.params, &self.context(s, o), p, self.config.attention)
    }
}
