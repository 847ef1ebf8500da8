use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{auroc, prior_matched_accuracy, spearman_ic};
use super::splits::{expanding_splits, Fold};
use crate::features::{FeatureMatrix, FeatureSetId};
use crate::gbdt::{fit, BoostedEnsemble, TrainConfig};
use crate::ingestion::{ReturnSeries, WeekKey};
use crate::stats::{mean, sample_std};
use crate::tpe::{optimize, Params, SearchSpace, Study, TpeConfig};
use crate::{fsutil, Error, Result};

type Row = Vec<Option<f64>>;

/// Label weeks with their direction label and the realized return it describes.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    pub weeks: Vec<WeekKey>,
    pub labels: Vec<bool>,
    pub realized_returns: Vec<f64>,
}

impl Targets {
    /// Week t is labeled by the sign of the following return.
    pub fn from_returns(returns: &ReturnSeries) -> Self {
        let mut t = Targets {
            weeks: Vec::new(),
            labels: Vec::new(),
            realized_returns: Vec::new(),
        };
        for pair in returns.entries.windows(2) {
            t.weeks.push(pair[0].0);
            t.labels.push(pair[1].1 > 0.0);
            t.realized_returns.push(pair[1].1);
        }
        t
    }

    pub fn len(&self) -> usize {
        self.weeks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weeks.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvConfig {
    pub k: usize,
    pub min_train_fraction: f64,
    pub inner_k: usize,
    pub inner_min_train_fraction: f64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k: 5,
            min_train_fraction: 0.4,
            inner_k: 3,
            inner_min_train_fraction: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonConfig {
    pub cv: CvConfig,
    pub tpe: TpeConfig,
    pub space: SearchSpace,
    /// Learner settings not covered by the search space.
    pub learner: TrainConfig,
    pub seed: u64,
    pub record_timings: bool,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        ComparisonConfig {
            cv: CvConfig::default(),
            tpe: TpeConfig::default(),
            space: SearchSpace::gbdt_default(),
            learner: TrainConfig::default(),
            seed: 0,
            record_timings: false,
        }
    }
}

/// Overrides `base` with any learner hyperparameters present in `params`.
pub fn train_config_from(params: &Params, base: &TrainConfig) -> Result<TrainConfig> {
    let mut cfg = base.clone();
    for (name, &v) in params {
        match name.as_str() {
            "num_trees" => cfg.num_trees = v as usize,
            "learning_rate" => cfg.learning_rate = v,
            "max_depth" => cfg.max_depth = v as usize,
            "min_samples_leaf" => cfg.min_samples_leaf = v as usize,
            "l2_lambda" => cfg.l2_lambda = v,
            "feature_fraction" => cfg.feature_fraction = v,
            "max_bins" => cfg.max_bins = v as usize,
            other => return Err(Error::Config(format!("unknown learner parameter {other}"))),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub train_positive_rate: f64,
    pub auroc: Option<f64>,
    pub accuracy: Option<f64>,
    pub ic: Option<f64>,
    pub best_params: Params,
    pub best_inner_auroc: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSummary {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n_folds: usize,
}

impl MetricSummary {
    fn of(values: impl Iterator<Item = Option<f64>>) -> Self {
        let v: Vec<f64> = values.flatten().collect();
        MetricSummary {
            mean: mean(&v),
            std: sample_std(&v),
            n_folds: v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub feature_set: FeatureSetId,
    pub folds: Vec<FoldMetrics>,
    pub auroc: MetricSummary,
    pub accuracy: MetricSummary,
    pub ic: MetricSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionRecord {
    pub set: FeatureSetId,
    pub fold: usize,
    pub iso_week: WeekKey,
    pub predicted_prob: f64,
    pub label: bool,
    pub realized_return: f64,
}

/// Everything produced for one feature set.
#[derive(Debug, Clone)]
pub struct SetOutcome {
    pub report: MetricsReport,
    pub predictions: Vec<PredictionRecord>,
    pub studies: Vec<Study>,
    /// Model refit on the last fold's training prefix.
    pub final_model: BoostedEnsemble<f64>,
    pub final_fold: Fold,
}

struct FoldOutcome {
    metrics: FoldMetrics,
    predictions: Vec<PredictionRecord>,
    study: Study,
    model: BoostedEnsemble<f64>,
}

fn fold_rng(seed: u64, set: FeatureSetId, fold: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let set_idx = FeatureSetId::ALL.iter().position(|s| *s == set).unwrap_or(0) as u64;
    rng.set_stream((set_idx << 16) | fold as u64);
    rng
}

fn as_targets(labels: &[bool]) -> Vec<f64> {
    labels.iter().map(|&y| if y { 1.0 } else { 0.0 }).collect()
}

fn predict(model: &BoostedEnsemble<f64>, rows: &[Row]) -> Result<Vec<f64>> {
    model.predict_proba(rows)
}

/// Tunes on nested expanding splits of a training prefix. Only the prefix is
/// visible here, so test-block labels cannot leak into tuning.
pub fn tune_on_prefix(
    rows: &[Row],
    labels: &[bool],
    feature_names: &[String],
    cfg: &ComparisonConfig,
    learner_seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<Study> {
    let inner = expanding_splits(rows.len(), cfg.cv.inner_k, cfg.cv.inner_min_train_fraction)?;
    inner.check_hygiene()?;
    let y = as_targets(labels);
    let objective = |params: &Params| -> f64 {
        let Ok(train_cfg) = train_config_from(params, &TrainConfig { seed: learner_seed, ..cfg.learner.clone() }) else {
            return f64::NAN;
        };
        let scores: Vec<f64> = inner
            .folds
            .iter()
            .filter_map(|f| {
                let model = fit(&rows[f.train.clone()], &y[f.train.clone()], feature_names, &train_cfg).ok()?;
                let p = predict(&model, &rows[f.test.clone()]).ok()?;
                auroc(&labels[f.test.clone()], &p).ok()
            })
            .collect();
        mean(&scores).unwrap_or(f64::NAN)
    };
    optimize(objective, &cfg.space, cfg.tpe.n_trials, &cfg.tpe, rng, cfg.record_timings)
}

fn metric<T>(what: &str, set: FeatureSetId, fold: usize, r: Result<T>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            log::warn!("{set} fold {fold}: {what} undefined ({e}); excluded from summary");
            None
        }
    }
}

fn run_fold(
    set: FeatureSetId,
    matrix: &FeatureMatrix<f64>,
    targets: &Targets,
    fold_idx: usize,
    fold: &Fold,
    cfg: &ComparisonConfig,
) -> Result<FoldOutcome> {
    let mut rng = fold_rng(cfg.seed, set, fold_idx);
    let learner_seed: u64 = rng.gen();
    let train_rows = &matrix.rows[fold.train.clone()];
    let train_labels = &targets.labels[fold.train.clone()];
    let study = tune_on_prefix(train_rows, train_labels, &matrix.columns, cfg, learner_seed, &mut rng)?;
    let best = study.best_trial();
    let train_cfg = train_config_from(&best.params, &TrainConfig { seed: learner_seed, ..cfg.learner.clone() })?;
    let model = fit(train_rows, &as_targets(train_labels), &matrix.columns, &train_cfg)?;

    let test_rows = &matrix.rows[fold.test.clone()];
    let test_labels = &targets.labels[fold.test.clone()];
    let test_returns = &targets.realized_returns[fold.test.clone()];
    let probs = predict(&model, test_rows)?;
    let rate = train_labels.iter().filter(|&&y| y).count() as f64 / train_labels.len() as f64;

    let metrics = FoldMetrics {
        fold: fold_idx,
        n_train: fold.train.len(),
        n_test: fold.test.len(),
        train_positive_rate: rate,
        auroc: metric("auroc", set, fold_idx, auroc(test_labels, &probs)),
        accuracy: metric("accuracy", set, fold_idx, prior_matched_accuracy(test_labels, &probs, rate)),
        ic: metric("ic", set, fold_idx, spearman_ic(&probs, test_returns)),
        best_params: best.params.clone(),
        best_inner_auroc: best.objective.is_finite().then_some(best.objective),
    };
    let predictions = fold
        .test
        .clone()
        .zip(&probs)
        .map(|(i, &p)| PredictionRecord {
            set,
            fold: fold_idx,
            iso_week: targets.weeks[i],
            predicted_prob: p,
            label: targets.labels[i],
            realized_return: targets.realized_returns[i],
        })
        .collect();
    Ok(FoldOutcome {
        metrics,
        predictions,
        study,
        model,
    })
}

/// Nested-TPE GBDT evaluated with expanding-window CV for each feature set.
/// Sets and folds run in parallel; results are ordered by (set, fold).
pub fn run_model_comparison(
    matrices: &BTreeMap<FeatureSetId, FeatureMatrix<f64>>,
    targets: &Targets,
    cfg: &ComparisonConfig,
) -> Result<Vec<SetOutcome>> {
    if matrices.is_empty() {
        return Err(Error::domain("no feature sets to compare"));
    }
    for (set, m) in matrices {
        if m.weeks != targets.weeks {
            return Err(Error::domain(format!("{set}: feature weeks not aligned with labels")));
        }
    }
    let plan = expanding_splits(targets.len(), cfg.cv.k, cfg.cv.min_train_fraction)?;
    plan.check_hygiene()?;

    let jobs: Vec<(FeatureSetId, usize)> = matrices
        .keys()
        .flat_map(|&s| (0..plan.folds.len()).map(move |f| (s, f)))
        .collect();
    let results: Vec<FoldOutcome> = jobs
        .par_iter()
        .map(|&(set, f)| run_fold(set, &matrices[&set], targets, f, &plan.folds[f], cfg))
        .collect::<Result<_>>()?;

    let mut results = results.into_iter();
    let mut out = Vec::with_capacity(matrices.len());
    for &set in matrices.keys() {
        let mut folds = Vec::new();
        let mut predictions = Vec::new();
        let mut studies = Vec::new();
        let mut model = None;
        for _ in 0..plan.folds.len() {
            let r = results.next().expect("one result per job");
            folds.push(r.metrics);
            predictions.extend(r.predictions);
            studies.push(r.study);
            model = Some(r.model);
        }
        let report = MetricsReport {
            feature_set: set,
            auroc: MetricSummary::of(folds.iter().map(|f| f.auroc)),
            accuracy: MetricSummary::of(folds.iter().map(|f| f.accuracy)),
            ic: MetricSummary::of(folds.iter().map(|f| f.ic)),
            folds,
        };
        out.push(SetOutcome {
            report,
            predictions,
            studies,
            final_model: model.expect("at least two folds"),
            final_fold: plan.folds.last().expect("nonempty plan").clone(),
        });
    }
    Ok(out)
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Per-fold rows followed by `mean` and `std` rows for each set.
pub fn write_metrics_csv(reports: &[MetricsReport], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["set", "fold", "auroc", "accuracy", "ic"])?;
    for r in reports {
        for f in &r.folds {
            w.write_record([r.feature_set.to_string(), f.fold.to_string(), cell(f.auroc), cell(f.accuracy), cell(f.ic)])?;
        }
    }
    for r in reports {
        w.write_record([r.feature_set.to_string(), "mean".into(), cell(r.auroc.mean), cell(r.accuracy.mean), cell(r.ic.mean)])?;
        w.write_record([r.feature_set.to_string(), "std".into(), cell(r.auroc.std), cell(r.accuracy.std), cell(r.ic.std)])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::domain(e.to_string()))?;
    fsutil::write_atomic(path, &bytes)
}

pub fn write_predictions_csv(records: &[PredictionRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["set", "fold", "iso_week", "predicted_prob", "label", "realized_return"])?;
    for p in records {
        w.write_record([
            p.set.to_string(),
            p.fold.to_string(),
            p.iso_week.to_string(),
            p.predicted_prob.to_string(),
            (p.label as u8).to_string(),
            p.realized_return.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::domain(e.to_string()))?;
    fsutil::write_atomic(path, &bytes)
}

/// (set, metric) -> (mean, std) as read back from a metrics CSV.
pub type MetricSummaries = BTreeMap<(String, String), (Option<f64>, Option<f64>)>;

/// Reads the `mean`/`std` block of a metrics CSV back as (set, metric) -> (mean, std).
pub fn read_metric_summaries(path: &Path) -> Result<MetricSummaries> {
    let text = fsutil::read_to_string(path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut means: BTreeMap<(String, String), Option<f64>> = BTreeMap::new();
    let mut out = BTreeMap::new();
    for rec in r.records() {
        let rec = rec?;
        let (set, fold) = (&rec[0], &rec[1]);
        if fold != "mean" && fold != "std" {
            continue;
        }
        for (i, name) in ["auroc", "accuracy", "ic"].iter().enumerate() {
            let v = rec[2 + i].parse::<f64>().ok();
            let key = (set.to_string(), name.to_string());
            if fold == "mean" {
                means.insert(key, v);
            } else {
                out.insert(key.clone(), (means.get(&key).copied().flatten(), v));
            }
        }
    }
    Ok(out)
}
