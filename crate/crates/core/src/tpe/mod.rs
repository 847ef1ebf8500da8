//! Tree-structured Parzen estimator for hyperparameter search.

mod optimizer;
mod parzen;
mod space;

pub use optimizer::{optimize, suggest, Study, TpeConfig, Trial};
pub use parzen::{selection_score, ParzenEstimator};
pub use space::{ParamKind, ParamSpec, Params, SearchSpace};
