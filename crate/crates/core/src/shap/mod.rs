//! Shapley attributions for tree ensembles.

mod brute;
mod tree;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ingestion::WeekKey;
use crate::scalar::Scalar;
use crate::{fsutil, Error, Result};

pub use brute::{brute_force_shapley, MAX_BRUTE_FORCE_FEATURES};
pub use tree::tree_shap;

/// Default cap on background rows.
pub const BACKGROUND_CAP: usize = 256;

/// Per-row attributions in margin (log-odds) units.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapMatrix<T> {
    pub base_value: T,
    pub values: Vec<Vec<T>>,
    pub feature_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceEntry<T> {
    pub feature: String,
    pub mean_abs_shap: T,
}

/// Mean absolute attribution per feature, largest first.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalImportance<T> {
    pub entries: Vec<ImportanceEntry<T>>,
    pub n_obs: usize,
}

impl<T: Scalar> ShapMatrix<T> {
    pub fn n_rows(&self) -> usize {
        self.values.len()
    }

    /// Long-format attributions: one line per (week, feature).
    pub fn write_csv(&self, weeks: &[WeekKey], path: &Path) -> Result<()> {
        if weeks.len() != self.values.len() {
            return Err(Error::domain("one week label per explained row required"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["iso_week", "feature", "shap_value"])?;
        for (week, row) in weeks.iter().zip(&self.values) {
            for (name, v) in self.feature_names.iter().zip(row) {
                w.write_record([week.to_string(), name.clone(), v.to_string()])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::domain(e.to_string()))?;
        fsutil::write_atomic(path, &bytes)
    }
}

pub fn global_importance<T: Scalar>(shap: &ShapMatrix<T>) -> Result<GlobalImportance<T>> {
    let n = shap.values.len();
    if n == 0 {
        return Err(Error::domain("global importance of an empty matrix"));
    }
    let mut entries: Vec<ImportanceEntry<T>> = shap
        .feature_names
        .iter()
        .enumerate()
        .map(|(j, name)| ImportanceEntry {
            feature: name.clone(),
            mean_abs_shap: shap.values.iter().map(|r| r[j].abs()).sum::<T>() / T::of_usize(n),
        })
        .collect();
    entries.sort_by(|a, b| {
        b.mean_abs_shap
            .partial_cmp(&a.mean_abs_shap)
            .expect("finite attributions")
            .then_with(|| a.feature.cmp(&b.feature))
    });
    Ok(GlobalImportance { entries, n_obs: n })
}

impl<T: Scalar> GlobalImportance<T> {
    pub fn rank_of(&self, feature: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.feature == feature)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["feature", "mean_abs_shap"])?;
        for e in &self.entries {
            w.write_record([e.feature.clone(), e.mean_abs_shap.to_string()])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::domain(e.to_string()))?;
        fsutil::write_atomic(path, &bytes)
    }
}

/// All rows when at most `cap`, else a seeded subsample kept in row order.
pub fn select_background<T: Clone>(rows: &[Vec<Option<T>>], cap: usize, seed: u64) -> Vec<Vec<Option<T>>> {
    if rows.len() <= cap {
        return rows.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, rows.len(), cap).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| rows[i].clone()).collect()
}
