//! Histogram gradient-boosted decision trees for binary classification.

mod binning;
mod model;
mod train;

pub use binning::{FeatureBins, MISSING_BIN};
pub use model::{sigmoid, BoostedEnsemble, TreeNode, MODEL_FORMAT, MODEL_VERSION};
pub use train::{fit, fit_with_trace, FitTrace, TrainConfig};
