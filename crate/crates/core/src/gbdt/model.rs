use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::{Error, Result};

/// Regression tree node. A present value goes left when `value <= threshold`;
/// a missing value follows `missing_goes_left`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound = "T: Scalar")]
pub enum TreeNode<T> {
    Split {
        feature_index: usize,
        threshold: T,
        missing_goes_left: bool,
        left: Box<TreeNode<T>>,
        right: Box<TreeNode<T>>,
    },
    Leaf {
        value: T,
    },
}

impl<T: Scalar> TreeNode<T> {
    /// Whether `row` descends to the left child of a split on `feature_index`.
    #[inline]
    pub fn goes_left(value: Option<T>, threshold: T, missing_goes_left: bool) -> bool {
        match value {
            Some(x) => x <= threshold,
            None => missing_goes_left,
        }
    }

    pub fn leaf_value(&self, row: &[Option<T>]) -> T {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature_index,
                    threshold,
                    missing_goes_left,
                    left,
                    right,
                } => {
                    node = if Self::goes_left(row[*feature_index], *threshold, *missing_goes_left) {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Distinct split features, ascending.
    pub fn features(&self) -> Vec<usize> {
        fn walk<T>(n: &TreeNode<T>, out: &mut Vec<usize>) {
            if let TreeNode::Split {
                feature_index,
                left,
                right,
                ..
            } = n
            {
                out.push(*feature_index);
                walk(left, out);
                walk(right, out);
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    pub(crate) fn scale_leaves(&mut self, factor: T) {
        match self {
            TreeNode::Leaf { value } => *value = *value * factor,
            TreeNode::Split { left, right, .. } => {
                left.scale_leaves(factor);
                right.scale_leaves(factor);
            }
        }
    }
}

/// Additive tree ensemble for binary classification:
/// `margin(x) = base_score + learning_rate * sum(leaf values)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BoostedEnsemble<T> {
    pub base_score: T,
    pub learning_rate: T,
    pub trees: Vec<TreeNode<T>>,
    pub feature_names: Vec<String>,
}

pub fn sigmoid<T: Scalar>(margin: T) -> T {
    let one = T::one();
    let p = if margin >= T::zero() {
        one / (one + (-margin).exp())
    } else {
        let e = margin.exp();
        e / (one + e)
    };
    // keep strictly inside (0, 1)
    let hi = one - T::epsilon() / T::of(2.0);
    p.max(T::min_positive_value()).min(hi)
}

impl<T: Scalar> BoostedEnsemble<T> {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn check_width(&self, row: &[Option<T>]) -> Result<()> {
        if row.len() != self.feature_names.len() {
            return Err(Error::domain(format!(
                "row has {} features, model expects {}",
                row.len(),
                self.feature_names.len()
            )));
        }
        Ok(())
    }

    /// Sum of leaf values, before scaling and offset.
    pub fn raw_sum(&self, row: &[Option<T>]) -> T {
        self.trees.iter().map(|t| t.leaf_value(row)).sum()
    }

    pub fn predict_margin(&self, row: &[Option<T>]) -> Result<T> {
        self.check_width(row)?;
        Ok(self.base_score + self.learning_rate * self.raw_sum(row))
    }

    pub fn predict_proba(&self, rows: &[Vec<Option<T>>]) -> Result<Vec<T>> {
        rows.iter().map(|r| self.predict_margin(r).map(sigmoid)).collect()
    }

    /// Versioned JSON document; floats round-trip exactly.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a, T: Scalar> {
            format: &'static str,
            version: u32,
            #[serde(flatten)]
            model: &'a BoostedEnsemble<T>,
        }
        Ok(serde_json::to_string_pretty(&Doc {
            format: MODEL_FORMAT,
            version: MODEL_VERSION,
            model: self,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(bound = "T: Scalar")]
        struct Doc<T> {
            format: String,
            version: u32,
            #[serde(flatten)]
            model: BoostedEnsemble<T>,
        }
        let doc: Doc<T> = serde_json::from_str(text)?;
        if doc.format != MODEL_FORMAT || doc.version != MODEL_VERSION {
            return Err(Error::domain(format!(
                "unsupported model document {} v{}",
                doc.format, doc.version
            )));
        }
        Ok(doc.model)
    }
}

pub const MODEL_FORMAT: &str = "wtisent-gbdt";
pub const MODEL_VERSION: u32 = 1;
