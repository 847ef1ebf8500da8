//! Descriptive statistics over plain slices.
//!
//! All routines are generic over [`Scalar`] and use two-pass formulas so that
//! results are independent of accumulation order only up to ordinary
//! floating-point rounding.

use crate::scalar::Scalar;
use crate::{Error, Result};

pub fn mean<T: Scalar>(xs: &[T]) -> Option<T> {
    if xs.is_empty() {
        return None;
    }
    let n = T::of_usize(xs.len());
    let m = xs.iter().copied().sum::<T>() / n;
    // second pass removes most of the rounding left by the naive sum
    let m = m + xs.iter().map(|&x| x - m).sum::<T>() / n;
    let (lo, hi) = xs.iter().fold((xs[0], xs[0]), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    Some(m.max(lo).min(hi))
}

/// Sample standard deviation with the `n - 1` denominator.
///
/// A single observation yields zero; an empty slice yields `None`.
pub fn sample_std<T: Scalar>(xs: &[T]) -> Option<T> {
    match xs.len() {
        0 => None,
        1 => Some(T::zero()),
        n => {
            if xs.iter().all(|&x| x == xs[0]) {
                return Some(T::zero());
            }
            let m = mean(xs)?;
            let ss: T = xs.iter().map(|&x| (x - m) * (x - m)).sum();
            Some((ss / T::of_usize(n - 1)).sqrt())
        }
    }
}

/// Quantile by linear interpolation between order statistics
/// (position `q * (n - 1)` in the sorted sample).
pub fn quantile_sorted<T: Scalar>(sorted: &[T], q: T) -> Option<T> {
    let n = sorted.len();
    if n == 0 {
        return None;
    }
    let pos = q * T::of_usize(n - 1);
    let lo = pos.floor();
    let lo_idx = lo.to_usize().unwrap_or(0).min(n - 1);
    let hi_idx = (lo_idx + 1).min(n - 1);
    let frac = pos - lo;
    Some(sorted[lo_idx] + (sorted[hi_idx] - sorted[lo_idx]) * frac)
}

/// Relevance-weighted mean `sum(w * x) / sum(w)`.
///
/// Pairs where either side is missing are dropped first. Returns `None` when
/// nothing survives or the surviving weights sum to zero.
pub fn weighted_mean<T: Scalar>(values: &[Option<T>], weights: &[Option<T>]) -> Result<Option<T>> {
    if values.len() != weights.len() {
        return Err(Error::domain(format!(
            "weighted mean: {} values but {} weights",
            values.len(),
            weights.len()
        )));
    }
    let mut num = T::zero();
    let mut den = T::zero();
    for (v, w) in values.iter().zip(weights) {
        if let (Some(v), Some(w)) = (v, w) {
            if *w < T::zero() {
                return Err(Error::domain("weighted mean: negative weight"));
            }
            num = num + *w * *v;
            den = den + *w;
        }
    }
    if den == T::zero() {
        Ok(None)
    } else {
        Ok(Some(num / den))
    }
}

/// Pearson correlation; `None` when fewer than two points or either side has
/// zero variance.
pub fn pearson<T: Scalar>(xs: &[T], ys: &[T]) -> Option<T> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let mx = mean(xs)?;
    let my = mean(ys)?;
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    let mut syy = T::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy = sxy + dx * dy;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
    }
    if sxx == T::zero() || syy == T::zero() {
        return None;
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    Some(r.max(-T::one()).min(T::one()))
}

/// 1-based ranks with ties receiving the average of the ranks they span.
pub fn average_ranks<T: Scalar>(xs: &[T]) -> Vec<T> {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![T::zero(); n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) share rank ((i+1) + j) / 2
        let r = T::of_usize(i + 1 + j) / T::of(2.0);
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}
