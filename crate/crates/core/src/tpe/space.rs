use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Uniform,
    LogUniform,
    IntegerUniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    pub low: f64,
    pub high: f64,
}

impl ParamSpec {
    pub fn new(name: &str, kind: ParamKind, low: f64, high: f64) -> Self {
        ParamSpec {
            name: name.to_string(),
            kind,
            low,
            high,
        }
    }

    /// Bounds of the space the densities live in: log scale for
    /// log-uniform, half-unit padding for integers.
    pub(crate) fn internal_bounds(&self) -> (f64, f64) {
        match self.kind {
            ParamKind::Uniform => (self.low, self.high),
            ParamKind::LogUniform => (self.low.ln(), self.high.ln()),
            ParamKind::IntegerUniform => (self.low - 0.5, self.high + 0.5),
        }
    }

    pub(crate) fn to_internal(&self, x: f64) -> f64 {
        match self.kind {
            ParamKind::LogUniform => x.ln(),
            _ => x,
        }
    }

    /// Maps back to the user scale and clamps into bounds; integers round.
    pub(crate) fn to_user(&self, z: f64) -> f64 {
        let x = match self.kind {
            ParamKind::Uniform => z,
            ParamKind::LogUniform => z.exp(),
            ParamKind::IntegerUniform => z.round(),
        };
        x.clamp(self.low, self.high)
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.low..=self.high).contains(&x) && (self.kind != ParamKind::IntegerUniform || x.fract() == 0.0)
    }
}

/// Ordered hyperparameter specs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub params: Vec<ParamSpec>,
}

/// Parameter values by name, in search-space order.
pub type Params = IndexMap<String, f64>;

impl SearchSpace {
    pub fn new(params: Vec<ParamSpec>) -> Result<Self> {
        let space = SearchSpace { params };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(Error::domain("search space is empty"));
        }
        for p in &self.params {
            if !(p.low < p.high) || !p.low.is_finite() || !p.high.is_finite() {
                return Err(Error::domain(format!("param {}: need low < high", p.name)));
            }
            if p.kind == ParamKind::LogUniform && p.low <= 0.0 {
                return Err(Error::domain(format!("param {}: log-uniform needs low > 0", p.name)));
            }
            if p.kind == ParamKind::IntegerUniform && (p.low.fract() != 0.0 || p.high.fract() != 0.0) {
                return Err(Error::domain(format!("param {}: integer bounds must be whole", p.name)));
            }
        }
        Ok(())
    }

    pub fn contains(&self, params: &Params) -> bool {
        self.params.len() == params.len()
            && self
                .params
                .iter()
                .all(|p| params.get(&p.name).is_some_and(|&x| p.contains(x)))
    }

    /// Search space for the boosted-tree learner.
    pub fn gbdt_default() -> Self {
        use ParamKind::*;
        SearchSpace {
            params: vec![
                ParamSpec::new("num_trees", IntegerUniform, 50.0, 500.0),
                ParamSpec::new("learning_rate", LogUniform, 0.01, 0.3),
                ParamSpec::new("max_depth", IntegerUniform, 2.0, 6.0),
                ParamSpec::new("min_samples_leaf", IntegerUniform, 5.0, 50.0),
                ParamSpec::new("l2_lambda", LogUniform, 1e-3, 10.0),
                ParamSpec::new("feature_fraction", Uniform, 0.5, 1.0),
            ],
        }
    }
}
