//! Weekly news-sentiment features for crude-oil futures direction forecasting.
//!
//! The pipeline runs in stages, each a module:
//!
//! * [`ingestion`]: news corpus retrieval, dedup, stratified sampling, weekly
//!   closes, log returns and next-week direction labels.
//! * [`extraction`]: per-article sentiment vectors from chat models, a
//!   three-class classifier and the vendor score.
//! * [`features`]: weekly aggregation into the 31-column feature table and the
//!   six comparison feature sets.
//! * [`gbdt`]: histogram gradient-boosted trees with logistic loss.
//! * [`tpe`]: Tree-structured Parzen Estimator tuner.
//! * [`eval`]: expanding-window cross-validation and metrics.
//! * [`shap`]: exact interventional Shapley attributions for the ensemble.
//! * [`report`]: run configuration, orchestration and report artifacts.
//!
//! Numeric code is generic over [`Scalar`]; the aliases below fix it to `f64`
//! for the pipeline.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod eval;
pub mod extraction;
pub mod features;
pub mod fsutil;
pub mod gbdt;
pub mod ingestion;
pub mod report;
pub mod scalar;
pub mod shap;
pub mod stats;
pub mod tpe;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type BoostedEnsemble = gbdt::BoostedEnsemble<f64>;
pub type TreeNode = gbdt::TreeNode<f64>;
pub type FeatureMatrix = features::FeatureMatrix<f64>;
pub type ShapMatrix = shap::ShapMatrix<f64>;
pub type GlobalImportance = shap::GlobalImportance<f64>;
