//! Expanding-window cross-validation, metrics, and the feature-set
//! comparison harness.

mod comparison;
mod metrics;
mod splits;

pub use comparison::{
    read_metric_summaries, run_model_comparison, train_config_from, tune_on_prefix, write_metrics_csv,
    write_predictions_csv, ComparisonConfig, CvConfig, FoldMetrics, MetricSummary, MetricsReport,
    PredictionRecord, SetOutcome, Targets,
};
pub use metrics::{auroc, prior_matched_accuracy, spearman_ic};
pub use splits::{expanding_splits, Fold, FoldPlan};
