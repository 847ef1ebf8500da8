use crate::scalar::Scalar;
use crate::stats::{average_ranks, pearson};
use crate::{Error, Result};

/// Mann-Whitney AUROC: share of (positive, negative) pairs ranked correctly,
/// ties counting one half. Computed from midranks in `O(n log n)`.
pub fn auroc<T: Scalar>(labels: &[bool], scores: &[T]) -> Result<T> {
    if labels.len() != scores.len() {
        return Err(Error::domain("auroc: length mismatch"));
    }
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::MetricUndefined("auroc needs both classes"));
    }
    let ranks = average_ranks(scores);
    let rank_sum: T = ranks.iter().zip(labels).filter(|(_, &y)| y).map(|(&r, _)| r).sum();
    let np = T::of_usize(n_pos);
    let u = rank_sum - np * (np + T::one()) / T::of(2.0);
    Ok(u / (np * T::of_usize(n_neg)))
}

/// Accuracy when the top `round(train_positive_rate * n)` scores are called
/// positive; equal scores favour the earlier week.
pub fn prior_matched_accuracy<T: Scalar>(labels: &[bool], scores: &[T], train_positive_rate: f64) -> Result<T> {
    if labels.len() != scores.len() || labels.is_empty() {
        return Err(Error::domain("accuracy: empty or mismatched inputs"));
    }
    if !(train_positive_rate > 0.0 && train_positive_rate < 1.0) {
        return Err(Error::domain(format!("accuracy: positive rate {train_positive_rate} outside (0, 1)")));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::domain("accuracy: non-finite score"));
    }
    let n = labels.len();
    let n_pred = ((train_positive_rate * n as f64) + 0.5).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps earlier weeks first among equal scores
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal));
    let mut predicted = vec![false; n];
    for &i in &order[..n_pred.min(n)] {
        predicted[i] = true;
    }
    let hits = predicted.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(T::of_usize(hits) / T::of_usize(n))
}

/// Spearman rank correlation: midranks, then Pearson on the rank vectors.
pub fn spearman_ic<T: Scalar>(predicted: &[T], realized: &[T]) -> Result<T> {
    if predicted.len() != realized.len() {
        return Err(Error::domain("spearman: length mismatch"));
    }
    if predicted.len() < 3 {
        return Err(Error::domain("spearman: need at least three points"));
    }
    let rp = average_ranks(predicted);
    let rr = average_ranks(realized);
    pearson(&rp, &rr).ok_or(Error::MetricUndefined("spearman ic with a constant input"))
}
