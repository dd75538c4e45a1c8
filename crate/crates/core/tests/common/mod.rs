//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use openki::model::{
    gradients, init_params, AttentionMode, Batch, ModelConfig, ModelKind, ModelParams, PairContext, ParamScope, GATE_A,
    GATE_ALPHA, GATE_B,
};
use openki::store::{EntityId, NeighborIndex, RelationId, RelationKind, Triple, TripleStore, Vocabulary};
use openki::trainer::{sample_batch, TrainConfig};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Every (model, attention) combination with distinct gradients.
pub fn all_variants() -> Vec<(ModelKind, AttentionMode)> {
    let mut v = vec![
        (ModelKind::F, AttentionMode::Query),
        (ModelKind::E, AttentionMode::Query),
        (ModelKind::FE, AttentionMode::Query),
        (ModelKind::Ene, AttentionMode::Query),
    ];
    for mode in AttentionMode::ALL {
        v.push((ModelKind::Rowless, mode));
        v.push((ModelKind::OpenKi, mode));
    }
    v
}

/// Random small graph: `n_kb` KB relations, `n_pred` predicates.
pub fn random_graph(rng: &mut ChaCha8Rng, n_ent: u32, n_kb: u32, n_pred: u32, n_kb_triples: usize, n_oie: usize) -> (Vocabulary, TripleStore) {
    let mut vocab = Vocabulary::new();
    for e in 0..n_ent {
        vocab.intern_entity(&format!("e{e}"));
    }
    let kb: Vec<RelationId> = (0..n_kb)
        .map(|r| vocab.intern_relation(&format!("kb{r}"), RelationKind::Kb).unwrap())
        .collect();
    let preds: Vec<RelationId> = (0..n_pred)
        .map(|r| vocab.intern_relation(&format!("p{r}"), RelationKind::OpenIe).unwrap())
        .collect();
    let mut store = TripleStore::new();
    let pair = |rng: &mut ChaCha8Rng| loop {
        let s = rng.gen_range(0..n_ent);
        let o = rng.gen_range(0..n_ent);
        if s != o {
            return (EntityId(s), EntityId(o));
        }
    };
    for _ in 0..n_kb_triples {
        let (s, o) = pair(rng);
        store.insert(Triple::new(s, kb[rng.gen_range(0..kb.len())], o, RelationKind::Kb));
    }
    let kb_pairs: Vec<_> = store.pairs().map(|(p, _)| *p).collect();
    for i in 0..n_oie {
        // most mentions land on KB pairs so pair evidence exists
        let (s, o) = if i % 3 != 2 { kb_pairs[rng.gen_range(0..kb_pairs.len())] } else { pair(rng) };
        store.insert(Triple::new(s, preds[rng.gen_range(0..preds.len())], o, RelationKind::OpenIe));
    }
    (vocab, store)
}

pub fn randomize_gates(params: &mut ModelParams, rng: &mut ChaCha8Rng) {
    for i in 0..3 {
        params.gates.data[GATE_A + i] = rng.gen_range(-2.0..2.0);
        params.gates.data[GATE_B + i] = rng.gen_range(-1.0..1.0);
        let mag = rng.gen_range(0.2..1.5);
        params.gates.data[GATE_ALPHA + i] = if rng.gen_bool(0.2) { -mag } else { mag };
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Query logits `v_q · v_p` over the pair's predicates.
pub fn query_logits(params: &ModelParams, ctx: &PairContext, q: RelationId) -> Vec<f64> {
    ctx.pair_relations
        .iter()
        .map(|&p| dot(params.rowless.row(p.index()), params.rowless.row(q.index())))
        .collect()
}

fn mean_rows(table: &openki::model::Table, rels: &[RelationId]) -> Vec<f64> {
    let mut acc = vec![0.0; table.dim];
    for r in rels {
        for (a, x) in acc.iter_mut().zip(table.row(r.index())) {
            *a += x;
        }
    }
    if !rels.is_empty() {
        for a in &mut acc {
            *a /= rels.len() as f64;
        }
    }
    acc
}

/// Neighbor logits `agg_s · subj_p + agg_o · obj_p`.
pub fn neighbor_logits(params: &ModelParams, ctx: &PairContext) -> Vec<f64> {
    let agg_s = mean_rows(&params.subj, &ctx.subject_neighbors);
    let agg_o = mean_rows(&params.obj, &ctx.object_neighbors);
    ctx.pair_relations
        .iter()
        .map(|&p| dot(&agg_s, params.subj.row(p.index())) + dot(&agg_o, params.obj.row(p.index())))
        .collect()
}

pub fn softmax_oracle(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Hinge-kink and MaxR-tie margin below which finite differences are not
/// comparable with the analytic gradient.
pub const KINK_MARGIN: f64 = 1e-3;

fn near_maxr_tie(params: &ModelParams, ctx: &PairContext, q: RelationId) -> bool {
    let mut logits = query_logits(params, ctx, q);
    logits.sort_by(|a, b| b.total_cmp(a));
    logits.len() > 1 && logits[0] - logits[1] < KINK_MARGIN
}

/// Drops items whose loss sits within [`KINK_MARGIN`] of a non-differentiable
/// point, and items the model cannot score.
pub fn smooth_items(params: &ModelParams, config: &ModelConfig, batch: &Batch) -> Batch {
    let items = batch
        .items
        .iter()
        .copied()
        .filter(|item| {
            let ctx = &batch.contexts[item.context];
            let (Ok(pos), Ok(neg)) = (
                openki::model::score(params, config, ctx, item.positive),
                openki::model::score(params, config, ctx, item.negative),
            ) else {
                return false;
            };
            let hinge = config.margin - pos + neg;
            let maxr = config.kind.uses_attention()
                && config.attention == AttentionMode::MaxR
                && (near_maxr_tie(params, ctx, item.positive) || near_maxr_tie(params, ctx, item.negative));
            hinge.abs() > KINK_MARGIN && !maxr
        })
        .collect();
    Batch {
        contexts: batch.contexts.clone(),
        items,
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub coords: usize,
    pub items: usize,
}

/// Denominator floor of the relative error; keeps finite-difference noise on
/// vanishing components from dominating.
pub const REL_ERR_FLOOR: f64 = 1e-3;
pub const FD_STEP: f64 = 1e-5;

/// Central finite differences of the batch loss against the analytic
/// gradient over every parameter coordinate.
pub fn gradient_check(seed: u64, kind: ModelKind, mode: AttentionMode) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (vocab, store) = random_graph(&mut rng, 6, 3, 4, 8, 14);
    let config = ModelConfig {
        dim_rowless: 5,
        dim_ene: 4,
        max_pair_predicates: 3,
        max_neighbors: 4,
        ..ModelConfig::new(kind, mode)
    };
    let mut scope = ParamScope::default();
    for t in store.with_source(RelationKind::Kb) {
        scope.entities.insert(t.subject);
        scope.entities.insert(t.object);
        scope.pairs.insert(t.pair());
    }
    let mut params = init_params(&config, &vocab, &scope, seed);
    randomize_gates(&mut params, &mut rng);
    let index = NeighborIndex::build(&store);
    let positives: Vec<Triple> = store.with_source(RelationKind::Kb).copied().collect();
    let tc = TrainConfig {
        neg_per_pos: 3,
        ..TrainConfig::default()
    };
    let batch = sample_batch(&positives, &store, &index, &vocab.kb_relations(), &config, &tc, &mut rng);
    let batch = smooth_items(&params, &config, &batch);
    let (_, grads) = gradients(&params, &config, &batch);

    let mut max_rel_err: f64 = 0.0;
    let mut coords = 0;
    for row in params.all_rows() {
        let dim = params.row(row).len();
        for j in 0..dim {
            let orig = params.row(row)[j];
            params.row_mut(row)[j] = orig + FD_STEP;
            let up = openki::model::batch_loss(&params, &config, &batch);
            params.row_mut(row)[j] = orig - FD_STEP;
            let down = openki::model::batch_loss(&params, &config, &batch);
            params.row_mut(row)[j] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let analytic = grads.get(row).map_or(0.0, |g| g[j]);
            let denom = analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR);
            max_rel_err = max_rel_err.max((analytic - numeric).abs() / denom);
            coords += 1;
        }
    }
    GradCheck {
        max_rel_err,
        coords,
        items: batch.items.len(),
    }
}

/// Brute-force `P(p|p̄′)` by enumerating every ordered entity pair.
pub fn bayes_preds_oracle(store: &TripleStore, n_ent: u32, n_rel: usize, observed: &[RelationId], p: RelationId, delta: f64) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for &q in observed {
        let (mut joint, mut marg) = (0u64, 0u64);
        for s in 0..n_ent {
            for o in 0..n_ent {
                let (s, o) = (EntityId(s), EntityId(o));
                let has_q = store.contains(s, q, o);
                if has_q {
                    marg += 1;
                    if store.contains(s, p, o) {
                        joint += 1;
                    }
                }
            }
        }
        best = best.max((joint as f64 + delta) / (marg as f64 + n_rel as f64 * delta));
    }
    best
}

/// Brute-force neighborhood factor for one side: enumerate every triple,
/// weight each neighbor occurrence equally.
pub fn bayes_side_oracle(store: &TripleStore, n_ent: u32, n_rel: usize, e: EntityId, as_subject: bool, p: RelationId, delta: f64) -> f64 {
    let occurrences: Vec<RelationId> = store
        .iter()
        .filter(|t| if as_subject { t.subject == e } else { t.object == e })
        .map(|t| t.relation)
        .collect();
    if occurrences.is_empty() {
        return 1.0 / n_rel as f64;
    }
    let mut by_rel: BTreeMap<RelationId, usize> = BTreeMap::new();
    for r in &occurrences {
        *by_rel.entry(*r).or_default() += 1;
    }
    by_rel
        .into_iter()
        .map(|(r, c)| c as f64 / occurrences.len() as f64 * bayes_preds_oracle(store, n_ent, n_rel, &[r], p, delta))
        .sum()
}

/// Average precision of a relevance list in ranked order: mean over the
/// positives of precision at their rank.
pub fn ap_oracle(relevance: &[bool]) -> Option<f64> {
    let mut hits = 0.0;
    let mut sum = 0.0;
    for (i, &r) in relevance.iter().enumerate() {
        if r {
            hits += 1.0;
            sum += hits / (i + 1) as f64;
        }
    }
    (hits > 0.0).then(|| sum / hits)
}

/// AUC-PR by trying every distinct score as a threshold: the step area
/// `Σ (R_t − R_prev) · P_t` over thresholds in descending order.
pub fn auc_pr_oracle(scores: &[f64], labels: &[bool]) -> f64 {
    let positives = labels.iter().filter(|&&l| l).count() as f64;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for t in thresholds {
        let predicted: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] >= t).collect();
        let tp = predicted.iter().filter(|&&i| labels[i]).count() as f64;
        let recall = tp / positives;
        let precision = tp / predicted.len() as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    area
}

/// Random parameters for `n_rel` relations with entries in `[-scale, scale]`.
pub fn random_params(rng: &mut ChaCha8Rng, n_rel: u32, dim_rowless: usize, dim_ene: usize, scale: f64) -> ModelParams {
    let mut vocab = Vocabulary::new();
    for r in 0..n_rel {
        vocab.intern_relation(&format!("r{r}"), RelationKind::OpenIe).unwrap();
    }
    let config = ModelConfig {
        dim_rowless,
        dim_ene,
        ..ModelConfig::default()
    };
    let mut params = init_params(&config, &vocab, &ParamScope::default(), rng.gen());
    for table in [&mut params.rowless, &mut params.subj, &mut params.obj] {
        for x in &mut table.data {
            *x = rng.gen_range(-scale..scale);
        }
    }
    params
}

/// Random context: distinct sorted pair predicates, neighborhoods with
/// repeats.
pub fn random_context(rng: &mut ChaCha8Rng, n_rel: u32, n_pair: usize) -> PairContext {
    let mut pair: Vec<RelationId> = rand::seq::index::sample(rng, n_rel as usize, n_pair.min(n_rel as usize))
        .into_iter()
        .map(|i| RelationId(i as u32))
        .collect();
    pair.sort();
    let neighbors = |rng: &mut ChaCha8Rng| {
        let n = rng.gen_range(0..6);
        let mut v: Vec<RelationId> = (0..n).map(|_| RelationId(rng.gen_range(0..n_rel))).collect();
        v.sort();
        v
    };
    let subject_neighbors = neighbors(rng);
    let object_neighbors = neighbors(rng);
    PairContext {
        subject: EntityId(0),
        object: EntityId(1),
        pair_relations: pair,
        subject_neighbors,
        object_neighbors,
    }
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

/// One randomized attention case; `Err` describes the first violated
/// property.
pub fn attention_case(seed: u64) -> Result<(), String> {
    use openki::model::{attention_weights, score_att, softmax};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_rel = rng.gen_range(2..10);
    let (dr, de) = (rng.gen_range(1..8), rng.gen_range(1..6));
    let params = random_params(&mut rng, n_rel, dr, de, 2.0);
    let n_pair = rng.gen_range(1..=n_rel as usize).min(6);
    let ctx = random_context(&mut rng, n_rel, n_pair);
    let q = RelationId(rng.gen_range(0..n_rel));
    let weights = |mode| attention_weights(&params, &ctx, q, mode).map_err(|e| e.to_string());

    for mode in AttentionMode::ALL {
        let w = weights(mode)?;
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || w.iter().any(|&x| x < 0.0) || w.len() != ctx.pair_relations.len() {
            return Err(format!("{mode}: weights {w:?} do not form a distribution"));
        }
        let expected: f64 = w
            .iter()
            .zip(&ctx.pair_relations)
            .map(|(wi, p)| wi * dot(params.rowless.row(p.index()), params.rowless.row(q.index())))
            .sum();
        let s = score_att(&params, &ctx, q, mode).map_err(|e| e.to_string())?;
        if (s - expected).abs() > 1e-9 * (1.0 + expected.abs()) {
            return Err(format!("{mode}: score {s} != weighted sum {expected}"));
        }
    }

    let ql = query_logits(&params, &ctx, q);
    let wq = weights(AttentionMode::Query)?;
    if !close(&wq, &softmax_oracle(&ql), 1e-12) {
        return Err(format!("query weights {wq:?} != softmax of logits {ql:?}"));
    }
    let shift = rng.gen_range(-50.0..50.0);
    let shifted: Vec<f64> = ql.iter().map(|x| x + shift).collect();
    if !close(&softmax(&shifted), &softmax(&ql), 1e-12) {
        return Err(format!("softmax not shift invariant for shift {shift}"));
    }
    let wn = weights(AttentionMode::Neighbor)?;
    if !close(&wn, &softmax_oracle(&neighbor_logits(&params, &ctx)), 1e-12) {
        return Err(format!("neighbor weights {wn:?} disagree with oracle"));
    }
    let prod: Vec<f64> = wq.iter().zip(&wn).map(|(a, b)| a * b).collect();
    let z: f64 = prod.iter().sum();
    let dual_oracle: Vec<f64> = prod.iter().map(|x| x / z).collect();
    let wd = weights(AttentionMode::Dual)?;
    if !close(&wd, &dual_oracle, 1e-9) {
        return Err(format!("dual {wd:?} != renormalized product {dual_oracle:?}"));
    }
    let best = ql
        .iter()
        .enumerate()
        .fold(0, |b, (i, &x)| if x > ql[b] { i } else { b });
    let wm = weights(AttentionMode::MaxR)?;
    let one_hot: Vec<f64> = (0..ql.len()).map(|i| if i == best { 1.0 } else { 0.0 }).collect();
    if wm != one_hot {
        return Err(format!("maxr {wm:?} not one-hot at {best}"));
    }

    let single = PairContext {
        pair_relations: vec![ctx.pair_relations[0]],
        ..ctx.clone()
    };
    let p = single.pair_relations[0];
    let direct = dot(params.rowless.row(p.index()), params.rowless.row(q.index()));
    for mode in AttentionMode::ALL {
        let w = attention_weights(&params, &single, q, mode).map_err(|e| e.to_string())?;
        let s = score_att(&params, &single, q, mode).map_err(|e| e.to_string())?;
        if w != [1.0] || (s - direct).abs() > 1e-12 * (1.0 + direct.abs()) {
            return Err(format!("{mode}: single predicate does not collapse ({w:?}, {s} vs {direct})"));
        }
    }
    Ok(())
}
