use crate::scalar::Scalar;

/// Bin code for a missing value.
pub const MISSING_BIN: u16 = u16::MAX;

/// Candidate split thresholds for one feature, frozen from the training data.
///
/// Thresholds sit strictly between consecutive distinct training values, so
/// a value's bin is the number of thresholds below it and a split after bin
/// `j` sends exactly bins `0..=j` left.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBins<T> {
    pub thresholds: Vec<T>,
}

impl<T: Scalar> FeatureBins<T> {
    /// Quantile bins over the non-missing values of a column.
    pub fn from_column(values: &[Option<T>], max_bins: usize) -> Self {
        let mut sorted: Vec<T> = values.iter().flatten().copied().collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite feature values"));
        let n = sorted.len();
        let mut distinct = sorted.clone();
        distinct.dedup();
        let cut = |a: T, b: T| {
            let mid = (a + b) / T::of(2.0);
            if mid < b {
                mid
            } else {
                a
            }
        };
        let thresholds = if distinct.len() <= max_bins {
            distinct.windows(2).map(|w| cut(w[0], w[1])).collect()
        } else {
            let mut t: Vec<T> = (1..max_bins)
                .filter_map(|k| {
                    let pos = k * n / max_bins;
                    (pos > 0 && sorted[pos - 1] < sorted[pos]).then(|| cut(sorted[pos - 1], sorted[pos]))
                })
                .collect();
            t.dedup();
            t
        };
        FeatureBins { thresholds }
    }

    pub fn n_bins(&self) -> usize {
        self.thresholds.len() + 1
    }

    pub fn bin(&self, value: Option<T>) -> u16 {
        match value {
            None => MISSING_BIN,
            Some(x) => self.thresholds.partition_point(|t| *t < x) as u16,
        }
    }
}
