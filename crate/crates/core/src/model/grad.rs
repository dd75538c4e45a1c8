//! Analytic gradients of the pairwise ranking loss.

use super::config::{AttentionMode, ModelConfig, ModelKind};
use super::context::{mean_role_embedding, PairContext, Role};
use super::params::{Gradients, ModelParams, ParamRow, GATE_A, GATE_ALPHA, GATE_B};
use super::score::{attention_forward, dot, score, sigmoid, AttentionForward};
use crate::error::{Error, Result};
use crate::store::RelationId;

/// `max(0, γ − pos + neg)`
#[inline]
pub fn ranking_loss(pos: f64, neg: f64, margin: f64) -> f64 {
    (margin - pos + neg).max(0.0)
}

/// One (positive, negative) comparison over a shared pair context.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RankingItem {
    pub context: usize,
    pub positive: RelationId,
    pub negative: RelationId,
}

/// A batch of positives, each with its own context and several negatives.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Batch {
    /// One context per positive triple.
    pub contexts: Vec<PairContext>,
    pub items: Vec<RankingItem>,
}

impl Batch {
    pub fn num_positives(&self) -> usize {
        self.contexts.len()
    }
}

struct AggGrad {
    subj: Vec<f64>,
    obj: Vec<f64>,
}

impl AggGrad {
    fn new(dim: usize) -> Self {
        Self {
            subj: vec![0.0; dim],
            obj: vec![0.0; dim],
        }
    }
}

fn axpy_into(acc: &mut [f64], coeff: f64, v: &[f64]) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += coeff * x;
    }
}

#[allow(clippy::too_many_arguments)]
fn attention_backward(
    params: &ModelParams,
    ctx: &PairContext,
    q: RelationId,
    mode: AttentionMode,
    fwd: &AttentionForward,
    aggs: (&[f64], &[f64]),
    upstream: f64,
    grads: &mut Gradients,
    agg_grad: &mut AggGrad,
) {
    let vq = params.rowless_of(q);
    let through_query = matches!(mode, AttentionMode::Query | AttentionMode::Dual);
    let through_neighbor = matches!(mode, AttentionMode::Neighbor | AttentionMode::Dual);
    for (j, &p) in ctx.pair_relations.iter().enumerate() {
        let w = fwd.weights[j];
        // dS/dz_j for the softmax logits z; a renormalized product of two
        // softmaxes is the softmax of the summed logits.
        let dz = w * (fwd.query_logits[j] - fwd.score);
        let dc = upstream * (w + if through_query { dz } else { 0.0 });
        grads.axpy(ParamRow::Rowless(q.0), dc, params.rowless_of(p));
        grads.axpy(ParamRow::Rowless(p.0), dc, vq);
        if through_neighbor {
            let dm = upstream * dz;
            grads.axpy(ParamRow::Subj(p.0), dm, aggs.0);
            grads.axpy(ParamRow::Obj(p.0), dm, aggs.1);
            axpy_into(&mut agg_grad.subj, dm, params.subj_of(p));
            axpy_into(&mut agg_grad.obj, dm, params.obj_of(p));
        }
    }
}

fn ene_backward(
    params: &ModelParams,
    p: RelationId,
    aggs: (&[f64], &[f64]),
    (g_subj, g_obj): (f64, f64),
    grads: &mut Gradients,
    agg_grad: &mut AggGrad,
) {
    grads.axpy(ParamRow::Subj(p.0), g_subj, aggs.0);
    grads.axpy(ParamRow::Obj(p.0), g_obj, aggs.1);
    axpy_into(&mut agg_grad.subj, g_subj, params.subj_of(p));
    axpy_into(&mut agg_grad.obj, g_obj, params.obj_of(p));
}

/// Pushes the gradient of the averaged neighborhoods back to each neighbor.
fn distribute_aggregates(ctx: &PairContext, agg_grad: &AggGrad, grads: &mut Gradients) {
    for (role, g) in [(Role::Subject, &agg_grad.subj), (Role::Object, &agg_grad.obj)] {
        let neighbors = ctx.neighbors(role);
        if neighbors.is_empty() || g.iter().all(|x| *x == 0.0) {
            continue;
        }
        let share = 1.0 / neighbors.len() as f64;
        for r in neighbors {
            let row = match role {
                Role::Subject => ParamRow::Subj(r.0),
                Role::Object => ParamRow::Obj(r.0),
            };
            grads.axpy(row, share, g);
        }
    }
}

/// Adds `upstream · ∂score(ctx, p)/∂θ` to `grads`.
pub fn accumulate_score_gradient(
    params: &ModelParams,
    config: &ModelConfig,
    ctx: &PairContext,
    p: RelationId,
    upstream: f64,
    grads: &mut Gradients,
) -> Result<()> {
    let pair = (ctx.subject, ctx.object);
    let needs_f = config.kind.uses_pair_params();
    let needs_e = config.kind.uses_entity_params();
    if needs_f {
        let slot = params.pair_slot(pair).ok_or(Error::UnseenPair(pair))?;
        grads.axpy(ParamRow::Pair(slot), upstream, params.rowless_of(p));
        grads.axpy(ParamRow::Rowless(p.0), upstream, params.pair.row(slot as usize));
    }
    if needs_e {
        let s = params.entity_slot(ctx.subject).ok_or(Error::UnseenEntity(ctx.subject))?;
        let o = params.entity_slot(ctx.object).ok_or(Error::UnseenEntity(ctx.object))?;
        grads.axpy(ParamRow::Entity(s), upstream, params.subj_of(p));
        grads.axpy(ParamRow::Subj(p.0), upstream, params.entity.row(s as usize));
        grads.axpy(ParamRow::Entity(o), upstream, params.obj_of(p));
        grads.axpy(ParamRow::Obj(p.0), upstream, params.entity.row(o as usize));
    }
    if needs_f || needs_e {
        return Ok(());
    }

    let agg_s = mean_role_embedding(params, Role::Subject, &ctx.subject_neighbors);
    let agg_o = mean_role_embedding(params, Role::Object, &ctx.object_neighbors);
    let aggs = (agg_s.as_slice(), agg_o.as_slice());
    let mut agg_grad = AggGrad::new(params.subj.dim);
    let mode = config.attention;

    match config.kind {
        ModelKind::Rowless => {
            let fwd = attention_forward(params, ctx, p, mode, &agg_s, &agg_o)?;
            attention_backward(params, ctx, p, mode, &fwd, aggs, upstream, grads, &mut agg_grad);
        }
        ModelKind::Ene => {
            ene_backward(params, p, aggs, (upstream, upstream), grads, &mut agg_grad);
        }
        ModelKind::OpenKi => {
            let att = attention_forward(params, ctx, p, mode, &agg_s, &agg_o).ok();
            let inputs = [
                att.as_ref().map(|a| a.score),
                Some(dot(&agg_s, params.subj_of(p))),
                Some(dot(&agg_o, params.obj_of(p))),
            ];
            let mut d_inputs = [0.0; 3];
            for i in 0..3 {
                let Some(x) = inputs[i] else { continue };
                let alpha = params.gate_alpha(i);
                let gate = alpha.max(0.0);
                let sg = sigmoid(params.gate_a(i) * x + params.gate_b(i));
                let dsig = upstream * gate * sg * (1.0 - sg);
                d_inputs[i] = dsig * params.gate_a(i);
                grads.add_at(ParamRow::Gates, 9, GATE_A + i, dsig * x);
                grads.add_at(ParamRow::Gates, 9, GATE_B + i, dsig);
                let d_alpha = if alpha > 0.0 { upstream * sg } else { 0.0 };
                grads.add_at(ParamRow::Gates, 9, GATE_ALPHA + i, d_alpha);
            }
            if let Some(fwd) = &att {
                attention_backward(params, ctx, p, mode, fwd, aggs, d_inputs[0], grads, &mut agg_grad);
            }
            ene_backward(params, p, aggs, (d_inputs[1], d_inputs[2]), grads, &mut agg_grad);
        }
        ModelKind::F | ModelKind::E | ModelKind::FE => unreachable!(),
    }
    distribute_aggregates(ctx, &agg_grad, grads);
    Ok(())
}

/// Batch loss (sum of hinge terms per positive, averaged over positives)
/// and its gradient. Items the model cannot score are skipped.
pub fn batch_loss(params: &ModelParams, config: &ModelConfig, batch: &Batch) -> f64 {
    let n = batch.num_positives().max(1) as f64;
    batch
        .items
        .iter()
        .filter_map(|item| {
            let ctx = &batch.contexts[item.context];
            let pos = score(params, config, ctx, item.positive).ok()?;
            let neg = score(params, config, ctx, item.negative).ok()?;
            Some(ranking_loss(pos, neg, config.margin))
        })
        .sum::<f64>()
        / n
}

pub fn gradients(params: &ModelParams, config: &ModelConfig, batch: &Batch) -> (f64, Gradients) {
    let n = batch.num_positives().max(1) as f64;
    let mut grads = Gradients::new();
    let mut loss = 0.0;
    for item in &batch.items {
        let ctx = &batch.contexts[item.context];
        let (Ok(pos), Ok(neg)) = (
            score(params, config, ctx, item.positive),
            score(params, config, ctx, item.negative),
        ) else {
            continue;
        };
        let l = ranking_loss(pos, neg, config.margin);
        if l <= 0.0 {
            continue;
        }
        loss += l;
        // both scores succeeded above, so the backward passes cannot fail
        accumulate_score_gradient(params, config, ctx, item.negative, 1.0 / n, &mut grads)
            .and_then(|_| accumulate_score_gradient(params, config, ctx, item.positive, -1.0 / n, &mut grads))
            .expect("scorable item");
    }
    (loss / n, grads)
}
