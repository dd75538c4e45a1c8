use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Descending by score, ties broken by ascending key.
pub fn rank_desc<K: Ord + Copy>(scored: &mut [(K, f64)]) {
    scored.sort_by(|a, b| match b.1.total_cmp(&a.1) {
        Ordering::Equal => a.0.cmp(&b.0),
        other => other,
    });
}

/// Average precision of a ranked relevance list; `None` without positives.
pub fn average_precision(relevance: &[bool]) -> Option<f64> {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &rel) in relevance.iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    (hits > 0).then(|| sum / hits as f64)
}

/// Area under the precision-recall curve with step interpolation.
///
/// Scores are visited in descending order with tied scores grouped into one
/// threshold; each threshold contributes `(ΔRecall) × Precision`.
pub fn auc_pr(scores: &[f64], labels: &[bool]) -> Result<f64> {
    assert_eq!(scores.len(), labels.len(), "scores and labels differ in length");
    let total_pos = labels.iter().filter(|&&l| l).count();
    if total_pos == 0 {
        return Err(Error::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut area = 0.0;
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]].total_cmp(&threshold) == Ordering::Equal {
            if labels[order[i]] {
                tp += 1;
            }
            seen += 1;
            i += 1;
        }
        let recall = tp as f64 / total_pos as f64;
        let precision = tp as f64 / seen as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(area)
}
