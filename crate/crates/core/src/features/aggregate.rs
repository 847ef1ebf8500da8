use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::schema::FeatureKind;
use crate::extraction::{ModelId, SentimentVector};
use crate::ingestion::WeekKey;
use crate::stats::{mean, sample_std, weighted_mean};
use crate::{Error, Result};

/// One model's statistics for one week. Every optional field is `None` for a
/// week without articles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeeklyAggregate {
    pub week: WeekKey,
    pub model_id: ModelId,
    pub article_count: usize,
    pub relevance_mean: Option<f64>,
    pub polarity_mean: Option<f64>,
    pub intensity_mean: Option<f64>,
    pub uncertainty_mean: Option<f64>,
    pub forwardness_mean: Option<f64>,
    pub polarity_std: Option<f64>,
    pub uncertainty_std: Option<f64>,
    pub polarity_momentum: Option<f64>,
    pub uncertainty_momentum: Option<f64>,
    pub forwardness_momentum: Option<f64>,
}

impl WeeklyAggregate {
    pub fn empty(week: WeekKey, model_id: ModelId) -> Self {
        WeeklyAggregate {
            week,
            model_id,
            article_count: 0,
            relevance_mean: None,
            polarity_mean: None,
            intensity_mean: None,
            uncertainty_mean: None,
            forwardness_mean: None,
            polarity_std: None,
            uncertainty_std: None,
            polarity_momentum: None,
            uncertainty_momentum: None,
            forwardness_momentum: None,
        }
    }

    pub fn value(&self, kind: FeatureKind) -> Option<f64> {
        match kind {
            FeatureKind::ArticleCount => Some(self.article_count as f64),
            FeatureKind::RelevanceMean => self.relevance_mean,
            FeatureKind::PolarityMean => self.polarity_mean,
            FeatureKind::IntensityMean => self.intensity_mean,
            FeatureKind::UncertaintyMean => self.uncertainty_mean,
            FeatureKind::ForwardnessMean => self.forwardness_mean,
            FeatureKind::PolarityStd => self.polarity_std,
            FeatureKind::UncertaintyStd => self.uncertainty_std,
            FeatureKind::PolarityMomentum => self.polarity_momentum,
            FeatureKind::UncertaintyMomentum => self.uncertainty_momentum,
            FeatureKind::ForwardnessMomentum => self.forwardness_momentum,
        }
    }
}

/// Relevance-weighted mean of one dimension; see [`crate::stats::weighted_mean`].
pub fn relevance_weighted_mean(values: &[Option<f64>], weights: &[Option<f64>]) -> Result<Option<f64>> {
    weighted_mean(values, weights)
}

fn present(xs: impl Iterator<Item = Option<f64>>) -> Vec<f64> {
    xs.flatten().collect()
}

/// Aggregates one week of one model's vectors.
///
/// Chat models use relevance weights for the four sentiment means and an
/// unweighted relevance mean; the classifier and vendor use equal weights.
/// Dispersion is the `n - 1` standard deviation over non-null values.
pub fn aggregate_week(vectors: &[(WeekKey, &SentimentVector)], model_id: ModelId) -> Result<WeeklyAggregate> {
    let Some(&(week, _)) = vectors.first() else {
        return Err(Error::domain("aggregate_week: no vectors"));
    };
    if let Some((w, v)) = vectors.iter().find(|(w, v)| *w != week || v.model_id != model_id) {
        return Err(Error::domain(format!(
            "aggregate_week: expected {week}/{model_id}, got {w}/{}",
            v.model_id
        )));
    }
    let vs: Vec<&SentimentVector> = vectors.iter().map(|(_, v)| *v).collect();
    let col = |f: fn(&SentimentVector) -> Option<f64>| vs.iter().map(|v| f(v)).collect::<Vec<_>>();
    let (pol, int, unc, fwd) = (
        col(|v| v.polarity),
        col(|v| v.intensity),
        col(|v| v.uncertainty),
        col(|v| v.forwardness),
    );
    let weights = if model_id.is_chat() {
        col(|v| v.relevance)
    } else {
        vec![Some(1.0); vs.len()]
    };
    let wmean = |xs: &[Option<f64>]| relevance_weighted_mean(xs, &weights);
    Ok(WeeklyAggregate {
        week,
        model_id,
        article_count: vs.len(),
        relevance_mean: mean(&present(vs.iter().map(|v| v.relevance))),
        polarity_mean: wmean(&pol)?,
        intensity_mean: wmean(&int)?,
        uncertainty_mean: wmean(&unc)?,
        forwardness_mean: wmean(&fwd)?,
        polarity_std: sample_std(&present(pol.into_iter())),
        uncertainty_std: sample_std(&present(unc.into_iter())),
        polarity_momentum: None,
        uncertainty_momentum: None,
        forwardness_momentum: None,
    })
}

/// Fills first-difference momentum for polarity, uncertainty and
/// forwardness, differencing against the previous week that had articles.
pub fn momentum_features(aggregates: &mut [WeeklyAggregate]) -> Result<()> {
    if let Some(pair) = aggregates.windows(2).find(|p| p[1].week <= p[0].week) {
        return Err(Error::domain(format!(
            "momentum: weeks out of order at {} -> {}",
            pair[0].week, pair[1].week
        )));
    }
    let diff = |cur: Option<f64>, prev: Option<f64>| Some(cur? - prev?);
    let mut prev: Option<usize> = None;
    for i in 0..aggregates.len() {
        if aggregates[i].article_count == 0 {
            aggregates[i].polarity_momentum = None;
            aggregates[i].uncertainty_momentum = None;
            aggregates[i].forwardness_momentum = None;
            continue;
        }
        let (p, u, f) = match prev {
            Some(j) => {
                let (a, b) = (&aggregates[j], &aggregates[i]);
                (
                    diff(b.polarity_mean, a.polarity_mean),
                    diff(b.uncertainty_mean, a.uncertainty_mean),
                    diff(b.forwardness_mean, a.forwardness_mean),
                )
            }
            None => (None, None, None),
        };
        let cur = &mut aggregates[i];
        (cur.polarity_momentum, cur.uncertainty_momentum, cur.forwardness_momentum) = (p, u, f);
        prev = Some(i);
    }
    Ok(())
}

/// Per-model weekly aggregates over a contiguous run of weeks.
pub type WeeklyTable = BTreeMap<ModelId, Vec<WeeklyAggregate>>;

/// Aggregates every model's vectors into one row per week of `weeks`
/// (which must be contiguous), with momentum filled. Vectors dated outside
/// `weeks` are ignored; weeks without vectors get empty rows.
pub fn build_weekly_table(
    vectors: &[SentimentVector],
    article_weeks: &HashMap<String, WeekKey>,
    weeks: &[WeekKey],
) -> Result<WeeklyTable> {
    check_contiguous(weeks)?;
    let mut grouped: BTreeMap<(ModelId, WeekKey), Vec<(WeekKey, &SentimentVector)>> = BTreeMap::new();
    for v in vectors {
        let week = *article_weeks
            .get(&v.article_id)
            .ok_or_else(|| Error::domain(format!("vector for unknown article {}", v.article_id)))?;
        grouped.entry((v.model_id, week)).or_default().push((week, v));
    }
    let mut table = WeeklyTable::new();
    for model in ModelId::ALL {
        let mut rows = Vec::with_capacity(weeks.len());
        for &w in weeks {
            rows.push(match grouped.get(&(model, w)) {
                Some(vs) => aggregate_week(vs, model)?,
                None => WeeklyAggregate::empty(w, model),
            });
        }
        momentum_features(&mut rows)?;
        table.insert(model, rows);
    }
    Ok(table)
}

pub(crate) fn check_contiguous(weeks: &[WeekKey]) -> Result<()> {
    match weeks.windows(2).find(|p| p[0].next() != p[1]) {
        Some(p) => Err(Error::domain(format!("weeks not contiguous: {} then {}", p[0], p[1]))),
        None => Ok(()),
    }
}
