//! Ranking evaluation: MAP over query relations, AUC-PR, argument-type
//! filtering and report files.

mod metrics;
mod report;
mod types;

use std::collections::BTreeMap;
use std::sync::OnceLock;

use rayon::prelude::*;

pub use metrics::{auc_pr, average_precision, rank_desc};
pub use report::{
    data_hash, emit_report, read_report, sha256_hex, EvalReport, RankedPair, RankingDump, RelationAp, ReportFormat,
};
pub use types::{
    infer_relation_arg_types, read_entity_types, type_constraint_filter, ArgTypes, EntityTypes, TypeMap,
    DEFAULT_TYPE_THRESHOLD,
};

use crate::model::{score_or_fallback, Model, PairContext};
use crate::store::{Pair, RelationId, RelationKind, TripleStore, Vocabulary};

/// Query count for small relation vocabularies.
pub const SMALL_TOP_K: usize = 10;
/// Query count once there are at least [`LARGE_VOCAB_THRESHOLD`] KB relations.
pub const LARGE_TOP_K: usize = 50;
pub const LARGE_VOCAB_THRESHOLD: usize = 100;

/// The `k` most frequent KB relations of `train` (ties by id). Without an
/// explicit `k`, 50 for large relation vocabularies and 10 otherwise.
pub fn top_k_relations(train: &TripleStore, vocab: &Vocabulary, k: Option<usize>) -> Vec<RelationId> {
    let mut counts: BTreeMap<RelationId, usize> = BTreeMap::new();
    for t in train.with_source(RelationKind::Kb) {
        *counts.entry(t.relation).or_default() += 1;
    }
    let k = k.unwrap_or(if vocab.kb_relations().len() >= LARGE_VOCAB_THRESHOLD {
        LARGE_TOP_K
    } else {
        SMALL_TOP_K
    });
    let mut ranked: Vec<(RelationId, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.into_iter().take(k).map(|(r, _)| r).collect()
}

fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = std::env::var("OPENKI_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .unwrap_or(0);
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool")
    })
}

#[derive(Clone, Copy, Debug, Default)]
pub struct EvalOptions<'a> {
    /// Drop candidates violating inferred argument types.
    pub types: Option<&'a TypeMap>,
    /// Keep the top-N ranked pairs of every query in the report.
    pub dump_top: Option<usize>,
}

struct QueryResult {
    relation: RelationId,
    ap: Option<f64>,
    positives: usize,
    scored: Vec<(Pair, f64, bool)>,
}

/// Ranks `pairs` for every query relation by `scorer` and averages the
/// per-relation average precision. Ground truth is membership in `truth`.
///
/// Query relations without a positive pair are skipped with a warning.
/// Filtered candidates score `-∞`. AUC-PR pools every (pair, query) score.
pub fn mean_average_precision<F>(
    scorer: F,
    truth: &TripleStore,
    pairs: &[Pair],
    queries: &[RelationId],
    vocab: &Vocabulary,
    options: EvalOptions<'_>,
) -> EvalReport
where
    F: Fn(Pair, RelationId) -> f64 + Sync,
{
    let run_query = |&q: &RelationId| {
        let allowed: Vec<bool> = match options.types {
            Some(types) => {
                let candidates: Vec<(Pair, RelationId)> = pairs.iter().map(|&p| (p, q)).collect();
                let kept = type_constraint_filter(&candidates, types);
                let mut kept = kept.into_iter().map(|(p, _)| p).peekable();
                pairs
                    .iter()
                    .map(|p| {
                        if kept.peek() == Some(p) {
                            kept.next();
                            true
                        } else {
                            false
                        }
                    })
                    .collect()
            }
            None => vec![true; pairs.len()],
        };
        let mut scored: Vec<(Pair, f64)> = pairs
            .iter()
            .zip(&allowed)
            .map(|(&p, &ok)| (p, if ok { scorer(p, q) } else { f64::NEG_INFINITY }))
            .collect();
        rank_desc(&mut scored);
        let relevance: Vec<bool> = scored.iter().map(|(p, _)| truth.contains(p.0, q, p.1)).collect();
        QueryResult {
            relation: q,
            ap: average_precision(&relevance),
            positives: relevance.iter().filter(|&&r| r).count(),
            scored: scored
                .into_iter()
                .zip(relevance)
                .map(|((p, s), r)| (p, s, r))
                .collect(),
        }
    };
    let results: Vec<QueryResult> = pool().install(|| queries.par_iter().map(run_query).collect());

    let mut relations = Vec::new();
    let mut pooled_scores = Vec::new();
    let mut pooled_labels = Vec::new();
    let mut dumps = Vec::new();
    for res in &results {
        let Some(ap) = res.ap else {
            log::warn!(
                "query relation `{}` has no positive pair; excluded",
                vocab.relation_name(res.relation)
            );
            continue;
        };
        relations.push(RelationAp {
            id: res.relation.0,
            name: vocab.relation_name(res.relation).to_owned(),
            ap,
            positives: res.positives,
        });
        for &(_, s, r) in &res.scored {
            pooled_scores.push(s);
            pooled_labels.push(r);
        }
        if let Some(n) = options.dump_top {
            dumps.push(RankingDump {
                relation: res.relation.0,
                ranked: res
                    .scored
                    .iter()
                    .take(n)
                    .map(|&((s, o), score, relevant)| RankedPair {
                        subject: s.0,
                        object: o.0,
                        score,
                        relevant,
                    })
                    .collect(),
            });
        }
    }
    let map = if relations.is_empty() {
        0.0
    } else {
        relations.iter().map(|r| r.ap).sum::<f64>() / relations.len() as f64
    };
    let auc = auc_pr(&pooled_scores, &pooled_labels).unwrap_or(0.0);
    EvalReport {
        config_hash: String::new(),
        data_hash: String::new(),
        k: queries.len(),
        map,
        auc_pr: auc,
        relations,
        ranking_dump: options.dump_top.map(|_| dumps),
    }
}

/// [`mean_average_precision`] for a trained model. Each pair is scored with
/// its full evidence; unscorable pairs fall back to 0.
pub fn evaluate_model(
    model: Model<'_>,
    truth: &TripleStore,
    pairs: &[Pair],
    queries: &[RelationId],
    vocab: &Vocabulary,
    options: EvalOptions<'_>,
) -> EvalReport {
    let contexts: BTreeMap<Pair, PairContext> = pairs.iter().map(|&(s, o)| ((s, o), model.context(s, o))).collect();
    let scorer = |p: Pair, q: RelationId| score_or_fallback(model.params, model.config, &contexts[&p], q);
    mean_average_precision(scorer, truth, pairs, queries, vocab, options)
}
