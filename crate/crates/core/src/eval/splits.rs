use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Train prefix `0..test.start` and the contiguous test block after it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Range<usize>,
    pub test: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
}

/// Expanding-window folds: the first `ceil(min_train_fraction * n)` weeks are
/// training only; the rest split into `k` consecutive test blocks whose sizes
/// differ by at most one, larger blocks first.
pub fn expanding_splits(n_weeks: usize, k: usize, min_train_fraction: f64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::domain(format!("expanding splits: k = {k}, need k >= 2")));
    }
    if !(min_train_fraction > 0.0 && min_train_fraction < 1.0) {
        return Err(Error::domain(format!(
            "expanding splits: min_train_fraction {min_train_fraction} outside (0, 1)"
        )));
    }
    let initial = (min_train_fraction * n_weeks as f64).ceil() as usize;
    if n_weeks < k + initial {
        return Err(Error::domain(format!(
            "expanding splits: {n_weeks} weeks cannot hold {initial} training weeks and {k} test blocks"
        )));
    }
    let rest = n_weeks - initial;
    let (base, extra) = (rest / k, rest % k);
    let mut start = initial;
    let folds = (0..k)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let fold = Fold {
                train: 0..start,
                test: start..start + len,
            };
            start += len;
            fold
        })
        .collect();
    Ok(FoldPlan { folds })
}

impl FoldPlan {
    /// Train precedes test in every fold, and test blocks tile the tail.
    pub fn check_hygiene(&self) -> Result<()> {
        let mut prev_end: Option<usize> = None;
        for f in &self.folds {
            if f.train.start != 0 || f.train.end != f.test.start || f.test.is_empty() {
                return Err(Error::domain(format!("fold hygiene violated: {f:?}")));
            }
            if prev_end.is_some_and(|e| e != f.test.start) {
                return Err(Error::domain(format!("test blocks not consecutive at {f:?}")));
            }
            prev_end = Some(f.test.end);
        }
        Ok(())
    }
}
