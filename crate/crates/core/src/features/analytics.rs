use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::extraction::{ModelId, SentimentVector};
use crate::scalar::Scalar;
use crate::stats::{mean, pearson, quantile_sorted, sample_std};
use crate::{Error, Result};

/// Summary of one score distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionStats<T> {
    pub count: usize,
    pub mean: T,
    pub std: T,
    pub min: T,
    pub q25: T,
    pub median: T,
    pub q75: T,
    pub max: T,
}

pub fn distribution_stats<T: Scalar>(values: &[T]) -> Result<DistributionStats<T>> {
    if values.is_empty() {
        return Err(Error::domain("distribution stats of an empty sample"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let q = |p: f64| quantile_sorted(&sorted, T::of(p)).expect("nonempty");
    Ok(DistributionStats {
        count: values.len(),
        mean: mean(values).expect("nonempty"),
        std: sample_std(values).expect("nonempty"),
        min: sorted[0],
        q25: q(0.25),
        median: q(0.5),
        q75: q(0.75),
        max: sorted[sorted.len() - 1],
    })
}

/// Pairwise-complete Pearson correlations of article polarity across models.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub models: Vec<ModelId>,
    pub values: Vec<Vec<Option<f64>>>,
    /// Complete observations behind each cell.
    pub counts: Vec<Vec<usize>>,
}

pub fn polarity_corr_matrix(vectors: &[SentimentVector]) -> CorrelationMatrix {
    let models = ModelId::ALL.to_vec();
    let mut by_model: Vec<HashMap<&str, f64>> = vec![HashMap::new(); models.len()];
    for v in vectors {
        if let (Some(p), Some(i)) = (v.polarity, models.iter().position(|m| *m == v.model_id)) {
            by_model[i].insert(v.article_id.as_str(), p);
        }
    }
    let n = models.len();
    let mut values = vec![vec![None; n]; n];
    let mut counts = vec![vec![0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut ids: Vec<&&str> = by_model[i].keys().filter(|k| by_model[j].contains_key(**k)).collect();
            ids.sort();
            let xs: Vec<f64> = ids.iter().map(|k| by_model[i][**k]).collect();
            let ys: Vec<f64> = ids.iter().map(|k| by_model[j][**k]).collect();
            counts[i][j] = xs.len();
            values[i][j] = if xs.len() < 2 {
                None
            } else if i == j {
                Some(1.0)
            } else {
                pearson(&xs, &ys)
            };
        }
    }
    CorrelationMatrix { models, values, counts }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_three_points() {
        let s = distribution_stats(&[-1.0f64, 0.0, 1.0]).unwrap();
        assert_eq!((s.mean, s.median, s.min, s.max), (0.0, 0.0, -1.0, 1.0));
        assert_eq!((s.q25, s.q75), (-0.5, 0.5));
    }

    #[test]
    fn constant_sample() {
        let s = distribution_stats(&[0.4f64; 6]).unwrap();
        assert_eq!(s.std, 0.0);
        assert!([s.min, s.q25, s.median, s.q75, s.max].iter().all(|&x| x == 0.4));
        assert!(distribution_stats::<f64>(&[]).is_err());
    }

    fn pv(id: &str, m: ModelId, p: f64) -> SentimentVector {
        let mut v = SentimentVector::empty(id, m);
        v.polarity = Some(p);
        v
    }

    #[test]
    fn correlation_cells() {
        let mut vs = Vec::new();
        for (k, p) in [0.1, 0.5, -0.3, 0.9].into_iter().enumerate() {
            let id = format!("a{k}");
            vs.push(pv(&id, ModelId::LlmA, p));
            vs.push(pv(&id, ModelId::LlmB, p));
            vs.push(pv(&id, ModelId::Classifier, -p));
        }
        vs.push(pv("only", ModelId::Vendor, 0.2));
        let c = polarity_corr_matrix(&vs);
        assert_eq!(c.values[0][0], Some(1.0));
        assert!((c.values[0][1].unwrap() - 1.0).abs() < 1e-12);
        assert!((c.values[0][2].unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(c.values[0][3], None);
        assert_eq!(c.values[3][3], None);
        assert_eq!(c.counts[0][1], 4);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(c.values[i][j], c.values[j][i]);
            }
        }
    }
}
