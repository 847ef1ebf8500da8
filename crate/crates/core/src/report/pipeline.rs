//! One function per CLI stage. Each reads and writes only files inside the
//! run directory (plus the configured price file), so stages can be rerun
//! independently.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::bundle::emit_report_bundle;
use super::config::RunConfig;
use super::synthetic::{generate, write_synthetic_inputs, SyntheticSpec};
use crate::eval::{run_model_comparison, write_metrics_csv, write_predictions_csv, Fold, MetricsReport, Targets};
use crate::extraction::{
    extract_corpus, read_vector_store, write_vector_store, ChatAdapter, ClassifierAdapter, ExtractionFailure, ModelId,
    SentimentAdapter, SentimentVector, StubAdapter, VendorAdapter,
};
use crate::features::{build_weekly_table, full_feature_matrix, FeatureMatrix, FeatureSetId};
use crate::gbdt::BoostedEnsemble;
use crate::ingestion::{
    assign_week, read_prices_csv, stratified_sample, vendor_scores_from_cache, weekly_close_series, weekly_log_returns,
    Article, NewsClient, NewsClientConfig, ReturnSeries, WeekKey,
};
use crate::shap::{global_importance, select_background, tree_shap, GlobalImportance};
use crate::{fsutil, Error, Result};

/// File locations inside a run directory.
#[derive(Debug, Clone)]
pub struct RunLayout {
    pub root: PathBuf,
}

impl RunLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunLayout { root: root.into() }
    }
    pub fn articles(&self) -> PathBuf {
        self.root.join("corpus/articles.jsonl")
    }
    pub fn vectors(&self) -> PathBuf {
        self.root.join("vectors/vectors.jsonl")
    }
    pub fn failures(&self) -> PathBuf {
        self.root.join("vectors/failures.jsonl")
    }
    pub fn extract_cache(&self, model: ModelId) -> PathBuf {
        self.root.join(format!("vectors/cache/{model}.jsonl"))
    }
    pub fn features(&self) -> PathBuf {
        self.root.join("features/weekly_features.csv")
    }
    pub fn labels(&self) -> PathBuf {
        self.root.join("features/labels.csv")
    }
    pub fn metrics(&self) -> PathBuf {
        self.root.join("eval/metrics.csv")
    }
    pub fn predictions(&self) -> PathBuf {
        self.root.join("eval/predictions.csv")
    }
    pub fn eval_summary(&self) -> PathBuf {
        self.root.join("eval/summary.json")
    }
    pub fn model(&self, set: FeatureSetId) -> PathBuf {
        self.root.join(format!("eval/models/{set}.json"))
    }
    pub fn study(&self, set: FeatureSetId, fold: usize) -> PathBuf {
        self.root.join(format!("eval/studies/{set}_fold{fold}.jsonl"))
    }
    pub fn shap(&self, set: FeatureSetId) -> PathBuf {
        self.root.join(format!("explain/{set}_shap.csv"))
    }
    pub fn shap_summary(&self, set: FeatureSetId) -> PathBuf {
        self.root.join(format!("explain/{set}_shap_summary.csv"))
    }
    pub fn explain_summary(&self) -> PathBuf {
        self.root.join("explain/summary.json")
    }
    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }
}

fn require(paths: &[PathBuf]) -> Result<()> {
    let missing: Vec<PathBuf> = paths.iter().filter(|p| !p.exists()).cloned().collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingInput(missing))
    }
}

fn news_config(cfg: &RunConfig) -> NewsClientConfig {
    NewsClientConfig {
        cache_dir: cfg.resolve(&cfg.news.cache_dir),
        ..cfg.news.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FetchSummary {
    pub fetched: usize,
    pub sampled: usize,
    pub requests: usize,
}

/// Fetches (or reads cached) monthly feeds, deduplicates, samples, and
/// writes the article store.
pub fn run_fetch(cfg: &RunConfig) -> Result<FetchSummary> {
    let client = NewsClient::new(news_config(cfg), cfg.window())?;
    let corpus = client.fetch_corpus()?;
    let sample = stratified_sample(&corpus, cfg.corpus.sample_fraction, cfg.corpus.sample_seed)?;
    fsutil::write_jsonl(&RunLayout::new(&cfg.output_dir).articles(), &sample)?;
    log::info!("fetch: {} articles after dedup, {} sampled", corpus.len(), sample.len());
    Ok(FetchSummary {
        fetched: corpus.len(),
        sampled: sample.len(),
        requests: client.requests_made(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractSummary {
    pub vectors: usize,
    pub failures: usize,
    pub adapter_calls: usize,
    pub cache_hits: usize,
}

fn adapter_for(cfg: &RunConfig, model: ModelId) -> Result<Box<dyn SentimentAdapter>> {
    let a = &cfg.adapters;
    Ok(match model {
        ModelId::Vendor => Box::new(VendorAdapter::new(vendor_scores_from_cache(&news_config(cfg).cache_dir)?)),
        m if a.stub => Box::new(StubAdapter::new(m, a.stub_seed)),
        ModelId::LlmA => Box::new(ChatAdapter::new(ModelId::LlmA, a.llm_a.clone())?),
        ModelId::LlmB => Box::new(ChatAdapter::new(ModelId::LlmB, a.llm_b.clone())?),
        ModelId::Classifier => Box::new(ClassifierAdapter::new(a.classifier.clone())?),
    })
}

/// Scores the article store with all four models.
pub fn run_extract(cfg: &RunConfig) -> Result<ExtractSummary> {
    let layout = RunLayout::new(&cfg.output_dir);
    require(&[layout.articles()])?;
    let articles: Vec<Article> = fsutil::read_jsonl(&layout.articles())?;
    let mut vectors: Vec<SentimentVector> = Vec::new();
    let mut failures: Vec<ExtractionFailure> = Vec::new();
    let mut summary = ExtractSummary {
        vectors: 0,
        failures: 0,
        adapter_calls: 0,
        cache_hits: 0,
    };
    for model in ModelId::ALL {
        let adapter = adapter_for(cfg, model)?;
        let mut ex = cfg.extract.clone();
        ex.cache_path = Some(layout.extract_cache(model));
        let out = extract_corpus(&articles, adapter.as_ref(), &ex)?;
        log::info!(
            "extract {model}: {} vectors, {} failures, {} calls, {} cached, {} nulls coerced, {} clamped",
            out.vectors.len(),
            out.failures.len(),
            out.adapter_calls,
            out.cache_hits,
            out.coerced_nulls,
            out.clamped
        );
        summary.adapter_calls += out.adapter_calls;
        summary.cache_hits += out.cache_hits;
        vectors.extend(out.vectors);
        failures.extend(out.failures);
    }
    summary.vectors = vectors.len();
    summary.failures = failures.len();
    write_vector_store(&layout.vectors(), &vectors)?;
    fsutil::write_jsonl(&layout.failures(), &failures)?;
    Ok(summary)
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelRow {
    iso_week: WeekKey,
    label: u8,
    realized_return: f64,
}

pub fn write_labels_csv(targets: &Targets, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for i in 0..targets.len() {
        w.serialize(LabelRow {
            iso_week: targets.weeks[i],
            label: targets.labels[i] as u8,
            realized_return: targets.realized_returns[i],
        })?;
    }
    let bytes = w.into_inner().map_err(|e| Error::domain(e.to_string()))?;
    fsutil::write_atomic(path, &bytes)
}

pub fn read_labels_csv(path: &Path) -> Result<Targets> {
    let text = fsutil::read_to_string(path)?;
    let mut t = Targets {
        weeks: Vec::new(),
        labels: Vec::new(),
        realized_returns: Vec::new(),
    };
    for row in csv::Reader::from_reader(text.as_bytes()).deserialize() {
        let row: LabelRow = row?;
        t.weeks.push(row.iso_week);
        t.labels.push(row.label == 1);
        t.realized_returns.push(row.realized_return);
    }
    Ok(t)
}

/// Weekly 31-column feature table and labels over the corpus window.
pub fn build_features(
    articles: &[Article],
    vectors: &[SentimentVector],
    returns: &ReturnSeries,
    first: WeekKey,
    last: WeekKey,
) -> Result<(FeatureMatrix<f64>, Targets)> {
    let article_weeks: HashMap<String, WeekKey> =
        articles.iter().map(|a| (a.id.clone(), assign_week(a.published_at))).collect();
    let weeks = first.range_inclusive(last);
    let table = build_weekly_table(vectors, &article_weeks, &weeks)?;
    let full = full_feature_matrix(&table)?;
    let mut targets = Targets::from_returns(returns);
    let keep: Vec<usize> = (0..targets.len())
        .filter(|&i| targets.weeks[i] >= first && targets.weeks[i] <= last)
        .collect();
    targets = Targets {
        weeks: keep.iter().map(|&i| targets.weeks[i]).collect(),
        labels: keep.iter().map(|&i| targets.labels[i]).collect(),
        realized_returns: keep.iter().map(|&i| targets.realized_returns[i]).collect(),
    };
    let matrix = full.align_to(&targets.weeks)?;
    Ok((matrix, targets))
}

pub fn run_features(cfg: &RunConfig) -> Result<(usize, usize)> {
    let layout = RunLayout::new(&cfg.output_dir);
    let prices = cfg.resolve(&cfg.corpus.prices_path);
    require(&[layout.articles(), layout.vectors(), prices.clone()])?;
    let articles: Vec<Article> = fsutil::read_jsonl(&layout.articles())?;
    let vectors = read_vector_store(&layout.vectors())?;
    let returns = weekly_log_returns(&weekly_close_series(&read_prices_csv(&prices)?)?)?;
    let (matrix, targets) = build_features(
        &articles,
        &vectors,
        &returns,
        WeekKey::of_date(cfg.corpus.start),
        WeekKey::of_date(cfg.corpus.end),
    )?;
    matrix.write_csv(&layout.features())?;
    write_labels_csv(&targets, &layout.labels())?;
    log::info!("features: {} weeks x {} columns", matrix.n_rows(), matrix.n_cols());
    Ok((matrix.n_rows(), matrix.n_cols()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FinalFold {
    set: FeatureSetId,
    fold: Fold,
}

#[derive(Serialize)]
struct EvalSummary<'a> {
    reports: Vec<&'a MetricsReport>,
    final_folds: Vec<FinalFold>,
}

#[derive(Deserialize)]
struct EvalSummaryIn {
    final_folds: Vec<FinalFold>,
}

fn load_inputs(layout: &RunLayout) -> Result<(FeatureMatrix<f64>, Targets)> {
    require(&[layout.features(), layout.labels()])?;
    let matrix = FeatureMatrix::<f64>::read_csv(&layout.features())?;
    let targets = read_labels_csv(&layout.labels())?;
    Ok((matrix, targets))
}

/// Nested-TPE comparison over the configured sets.
pub fn run_evaluate(cfg: &RunConfig) -> Result<Vec<MetricsReport>> {
    let layout = RunLayout::new(&cfg.output_dir);
    let (full, targets) = load_inputs(&layout)?;
    let mut matrices = BTreeMap::new();
    for &set in &cfg.sets {
        matrices.insert(set, full.select_set(set)?);
    }
    let outcomes = run_model_comparison(&matrices, &targets, &cfg.comparison())?;

    let mut predictions = Vec::new();
    for o in &outcomes {
        let set = o.report.feature_set;
        predictions.extend(o.predictions.iter().cloned());
        fsutil::write_atomic(&layout.model(set), o.final_model.to_json()?.as_bytes())?;
        for (i, study) in o.studies.iter().enumerate() {
            study.write_log(&layout.study(set, i))?;
        }
        log::info!(
            "evaluate {set}: auroc {:?} accuracy {:?} ic {:?}",
            o.report.auroc.mean,
            o.report.accuracy.mean,
            o.report.ic.mean
        );
    }
    let reports: Vec<MetricsReport> = outcomes.iter().map(|o| o.report.clone()).collect();
    write_metrics_csv(&reports, &layout.metrics())?;
    write_predictions_csv(&predictions, &layout.predictions())?;
    let summary = EvalSummary {
        reports: reports.iter().collect(),
        final_folds: outcomes
            .iter()
            .map(|o| FinalFold {
                set: o.report.feature_set,
                fold: o.final_fold.clone(),
            })
            .collect(),
    };
    fsutil::write_atomic(&layout.eval_summary(), serde_json::to_string_pretty(&summary)?.as_bytes())?;
    Ok(reports)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExplainOutcome {
    pub set: FeatureSetId,
    pub base_value: f64,
    pub n_explained: usize,
    pub n_background: usize,
    /// Largest |base + sum(phi) - margin| over explained rows.
    pub max_local_accuracy_error: f64,
    #[serde(skip)]
    pub importance: GlobalImportance<f64>,
}

/// Attributions for each set's final-fold model on that fold's test rows,
/// against (a capped sample of) its training rows.
pub fn run_explain(cfg: &RunConfig) -> Result<Vec<ExplainOutcome>> {
    let layout = RunLayout::new(&cfg.output_dir);
    let mut needed = vec![layout.eval_summary()];
    needed.extend(cfg.sets.iter().map(|&s| layout.model(s)));
    require(&needed)?;
    let (full, targets) = load_inputs(&layout)?;
    let summary: EvalSummaryIn = serde_json::from_str(&fsutil::read_to_string(&layout.eval_summary())?)?;

    let mut out = Vec::new();
    for &set in &cfg.sets {
        let fold = summary
            .final_folds
            .iter()
            .find(|f| f.set == set)
            .ok_or_else(|| Error::MissingInput(vec![layout.eval_summary()]))?
            .fold
            .clone();
        let model = BoostedEnsemble::<f64>::from_json(&fsutil::read_to_string(&layout.model(set))?)?;
        let matrix = full.select_set(set)?;
        let bg = select_background(&matrix.rows[fold.train.clone()], cfg.explain.background_cap, cfg.seed);
        let rows = &matrix.rows[fold.test.clone()];
        let shap = tree_shap(&model, rows, &bg)?;
        let mut max_err = 0.0f64;
        for (row, phi) in rows.iter().zip(&shap.values) {
            let err = (shap.base_value + phi.iter().sum::<f64>() - model.predict_margin(row)?).abs();
            max_err = max_err.max(err);
        }
        let weeks = &targets.weeks[fold.test.clone()];
        shap.write_csv(weeks, &layout.shap(set))?;
        let importance = global_importance(&shap)?;
        importance.write_csv(&layout.shap_summary(set))?;
        log::info!("explain {set}: top feature {}", importance.entries[0].feature);
        out.push(ExplainOutcome {
            set,
            base_value: shap.base_value,
            n_explained: rows.len(),
            n_background: bg.len(),
            max_local_accuracy_error: max_err,
            importance,
        });
    }
    fsutil::write_atomic(&layout.explain_summary(), serde_json::to_string_pretty(&out)?.as_bytes())?;
    Ok(out)
}

pub fn run_report(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    emit_report_bundle(&cfg.output_dir, cfg)
}

/// Config used by `replay`: stub adapters, synthetic inputs inside the run
/// directory, no wall-clock fields.
pub fn replay_config(seed: u64, out: &Path, spec: &SyntheticSpec) -> RunConfig {
    let mut cfg = RunConfig {
        seed,
        output_dir: out.to_path_buf(),
        record_timings: false,
        ..RunConfig::default()
    };
    cfg.corpus.start = spec.start;
    cfg.corpus.end = spec.end();
    cfg.corpus.sample_fraction = 0.8;
    cfg.corpus.sample_seed = seed;
    cfg.corpus.prices_path = PathBuf::from("corpus/prices.csv");
    cfg.news.cache_dir = PathBuf::from("corpus");
    // every month is pre-cached, so no request is ever made
    cfg.news.base_url = "http://127.0.0.1:9".into();
    cfg.adapters.stub = true;
    cfg.adapters.stub_seed = seed;
    cfg.extract.retry_backoff_ms = 0;
    cfg.explain.report_set = FeatureSetId::Gpt;
    cfg
}

#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    pub reports: Vec<MetricsReport>,
    pub explanations: Vec<ExplainOutcome>,
    pub artifacts: Vec<PathBuf>,
}

/// Synthetic end-to-end run: generate inputs, then every stage in order.
pub fn run_replay(cfg: &RunConfig, spec: &SyntheticSpec) -> Result<ReplayOutcome> {
    fsutil::create_dir(&cfg.output_dir)?;
    let data = generate(spec)?;
    write_synthetic_inputs(
        &data,
        &news_config(cfg).cache_dir,
        &cfg.resolve(&cfg.corpus.prices_path),
    )?;
    cfg.save()?;
    run_fetch(cfg)?;
    run_extract(cfg)?;
    run_features(cfg)?;
    let reports = run_evaluate(cfg)?;
    let explanations = run_explain(cfg)?;
    let artifacts = run_report(cfg)?;
    Ok(ReplayOutcome {
        reports,
        explanations,
        artifacts,
    })
}
