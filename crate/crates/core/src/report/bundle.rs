use std::path::{Path, PathBuf};

use super::config::RunConfig;
use super::pipeline::RunLayout;
use super::svg;
use crate::eval::read_metric_summaries;
use crate::extraction::{read_vector_store, ModelId, SentimentVector};
use crate::features::{distribution_stats, polarity_corr_matrix, FeatureSetId};
use crate::{fsutil, Error, Result};

pub const POLARITY_STATS: &str = "polarity_stats.csv";
pub const POLARITY_CORR: &str = "polarity_corr.csv";
pub const POLARITY_CORR_SVG: &str = "polarity_corr.svg";
pub const BOXPLOT_QUARTILES: &str = "boxplot_quartiles.csv";
pub const METRICS_TABLE: &str = "metrics_table.csv";
pub const METRICS_SVG: &str = "model_comparison.svg";
pub const SHAP_IMPORTANCE: &str = "shap_importance.csv";
pub const SHAP_SVG: &str = "shap_importance.svg";

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::domain(e.to_string()))
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn dimension(v: &SentimentVector, dim: &str) -> Option<f64> {
    match dim {
        "relevance" => v.relevance,
        "polarity" => v.polarity,
        "intensity" => v.intensity,
        "uncertainty" => v.uncertainty,
        "forwardness" => v.forwardness,
        _ => None,
    }
}

const DIMENSIONS: [&str; 5] = ["relevance", "polarity", "intensity", "uncertainty", "forwardness"];

/// Writes the report artifacts under `run_dir/report` and returns their
/// paths. Fails with the full list of missing inputs when upstream stages
/// have not run.
pub fn emit_report_bundle(run_dir: &Path, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let layout = RunLayout::new(run_dir);
    let shap_set = cfg.explain.report_set;
    let inputs = [layout.vectors(), layout.metrics(), layout.shap_summary(shap_set)];
    let missing: Vec<PathBuf> = inputs.iter().filter(|p| !p.exists()).cloned().collect();
    if !missing.is_empty() {
        return Err(Error::MissingInput(missing));
    }
    let out_dir = layout.report_dir();
    let mut written = Vec::new();
    let mut emit = |name: &str, bytes: &[u8]| -> Result<()> {
        let p = out_dir.join(name);
        fsutil::write_atomic(&p, bytes)?;
        written.push(p);
        Ok(())
    };

    let vectors = read_vector_store(&layout.vectors())?;

    // polarity distribution per model
    let mut rows = Vec::new();
    for model in ModelId::ALL {
        let p: Vec<f64> = vectors
            .iter()
            .filter(|v| v.model_id == model)
            .filter_map(|v| v.polarity)
            .collect();
        let row = match distribution_stats(&p) {
            Ok(s) => vec![
                model.to_string(),
                s.count.to_string(),
                s.mean.to_string(),
                s.std.to_string(),
                s.min.to_string(),
                s.q25.to_string(),
                s.median.to_string(),
                s.q75.to_string(),
                s.max.to_string(),
            ],
            Err(_) => {
                let mut r = vec![model.to_string(), "0".into()];
                r.extend(std::iter::repeat_n(String::new(), 7));
                r
            }
        };
        rows.push(row);
    }
    emit(
        POLARITY_STATS,
        &csv_bytes(&["model", "count", "mean", "std", "min", "q25", "median", "q75", "max"], rows)?,
    )?;

    // pairwise polarity correlation
    let corr = polarity_corr_matrix(&vectors);
    let names: Vec<String> = corr.models.iter().map(|m| m.feature_prefix().to_string()).collect();
    let mut header = vec!["model"];
    header.extend(names.iter().map(String::as_str));
    let rows = names
        .iter()
        .zip(&corr.values)
        .map(|(n, vals)| {
            let mut r = vec![n.clone()];
            r.extend(vals.iter().map(|v| fmt(*v)));
            r
        })
        .collect();
    emit(POLARITY_CORR, &csv_bytes(&header, rows)?)?;
    emit(
        POLARITY_CORR_SVG,
        svg::heatmap(&names, &corr.values, "Pairwise polarity correlation").as_bytes(),
    )?;

    // box-plot source data for the chat models
    let mut rows = Vec::new();
    for model in [ModelId::LlmA, ModelId::LlmB] {
        for dim in DIMENSIONS {
            let xs: Vec<f64> = vectors
                .iter()
                .filter(|v| v.model_id == model)
                .filter_map(|v| dimension(v, dim))
                .collect();
            if let Ok(s) = distribution_stats(&xs) {
                rows.push(vec![
                    model.to_string(),
                    dim.to_string(),
                    s.count.to_string(),
                    s.min.to_string(),
                    s.q25.to_string(),
                    s.median.to_string(),
                    s.q75.to_string(),
                    s.max.to_string(),
                ]);
            }
        }
    }
    emit(
        BOXPLOT_QUARTILES,
        &csv_bytes(&["model", "dimension", "count", "min", "q25", "median", "q75", "max"], rows)?,
    )?;

    // cross-validated metrics, one row per evaluated set
    let summaries = read_metric_summaries(&layout.metrics())?;
    let sets: Vec<FeatureSetId> = FeatureSetId::ALL
        .into_iter()
        .filter(|s| summaries.contains_key(&(s.to_string(), "auroc".to_string())))
        .collect();
    let get = |s: FeatureSetId, m: &str| summaries.get(&(s.to_string(), m.to_string())).copied().unwrap_or((None, None));
    let rows = sets
        .iter()
        .map(|&s| {
            let mut r = vec![s.to_string()];
            for m in ["auroc", "accuracy", "ic"] {
                let (mean, std) = get(s, m);
                r.push(fmt(mean));
                r.push(fmt(std));
            }
            r
        })
        .collect();
    emit(
        METRICS_TABLE,
        &csv_bytes(
            &["set", "auroc_mean", "auroc_std", "accuracy_mean", "accuracy_std", "ic_mean", "ic_std"],
            rows,
        )?,
    )?;
    let groups: Vec<String> = sets.iter().map(|s| s.to_string()).collect();
    let series: Vec<(String, Vec<Option<f64>>)> = ["auroc", "accuracy", "ic"]
        .iter()
        .map(|m| (m.to_string(), sets.iter().map(|&s| get(s, m).0).collect()))
        .collect();
    emit(METRICS_SVG, svg::grouped_bars(&groups, &series, "Model comparison (CV mean)").as_bytes())?;

    // global SHAP importance of the chosen set
    let text = fsutil::read_to_string(&layout.shap_summary(shap_set))?;
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for rec in csv::Reader::from_reader(text.as_bytes()).records() {
        let rec = rec?;
        labels.push(rec[0].to_string());
        values.push(
            rec[1]
                .parse::<f64>()
                .map_err(|_| Error::domain(format!("bad mean_abs_shap {:?}", &rec[1])))?,
        );
    }
    emit(SHAP_IMPORTANCE, text.as_bytes())?;
    emit(
        SHAP_SVG,
        svg::horizontal_bars(&labels, &values, &format!("Mean |SHAP| ({shap_set})")).as_bytes(),
    )?;
    Ok(written)
}
