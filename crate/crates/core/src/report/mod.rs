//! Run configuration, stage orchestration, synthetic replay inputs, and
//! report artifacts.

mod bundle;
mod config;
mod pipeline;
pub mod svg;
mod synthetic;

pub use bundle::{
    emit_report_bundle, BOXPLOT_QUARTILES, METRICS_SVG, METRICS_TABLE, POLARITY_CORR, POLARITY_CORR_SVG,
    POLARITY_STATS, SHAP_IMPORTANCE, SHAP_SVG,
};
pub use config::{AdapterConfig, CorpusConfig, ExplainConfig, RunConfig, CONFIG_FILE};
pub use pipeline::{
    build_features, read_labels_csv, replay_config, run_evaluate, run_explain, run_extract, run_features, run_fetch,
    run_replay, run_report, write_labels_csv, ExplainOutcome, ExtractSummary, FetchSummary, ReplayOutcome, RunLayout,
};
pub use synthetic::{generate, write_synthetic_inputs, SyntheticData, SyntheticSpec, ENERGY_TOPIC};
