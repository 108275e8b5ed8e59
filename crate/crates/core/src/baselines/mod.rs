//! Classical regressors over per-channel summary features.

mod features;
mod forest;
mod gboost;
mod results;
mod tree;

use std::fmt::Debug;

use rayon::prelude::*;

pub use features::{feature_matrix, summarize, NUM_FEATURES, STATS_PER_CHANNEL};
pub use forest::{Forest, ForestRegressor};
pub use gboost::{Boosted, GBoostRegressor};
pub use results::ResultsTable;
pub use tree::{Tree, TreeParams, TreeRegressor};

use crate::geodata::NUM_LABELS;
use crate::seeds::{self, stream};
use crate::{Result, WamError};

/// A fitted single-output model.
pub trait FittedModel: Debug + Send + Sync {
    fn predict(&self, x: &[f64]) -> f64;
}

/// A single-output fitting strategy.
pub trait Regressor: Debug + Send + Sync {
    fn name(&self) -> &str;
    /// Hyperparameters as logged alongside results.
    fn describe(&self) -> String;
    fn fit(&self, x: &[Vec<f64>], y: &[f64], seed: u64) -> Result<Box<dyn FittedModel>>;
}

pub(crate) fn check_fit_input(x: &[Vec<f64>], y: &[f64]) -> Result<()> {
    if x.is_empty() || x.len() != y.len() {
        return Err(WamError::Config(format!(
            "baseline fit needs matching non-empty inputs, found {} rows and {} targets",
            x.len(),
            y.len()
        )));
    }
    let d = x[0].len();
    if d == 0 || x.iter().any(|r| r.len() != d) {
        return Err(WamError::Config(
            "baseline feature rows must share a non-zero width".into(),
        ));
    }
    Ok(())
}

/// Constant model emitting the training mean.
#[derive(Clone, Debug, Default)]
pub struct AverageRegressor;

#[derive(Clone, Debug)]
pub struct Constant(pub f64);

impl FittedModel for Constant {
    fn predict(&self, _x: &[f64]) -> f64 {
        self.0
    }
}

impl Regressor for AverageRegressor {
    fn name(&self) -> &str {
        "average"
    }

    fn describe(&self) -> String {
        "training mean".into()
    }

    fn fit(&self, x: &[Vec<f64>], y: &[f64], _seed: u64) -> Result<Box<dyn FittedModel>> {
        check_fit_input(x, y)?;
        Ok(Box::new(Constant(y.iter().sum::<f64>() / y.len() as f64)))
    }
}

/// One fitted model per label.
#[derive(Debug)]
pub struct MultiOutput {
    pub method: String,
    pub models: Vec<Box<dyn FittedModel>>,
}

impl MultiOutput {
    /// Fits the labels independently; each label draws from its own seed stream.
    pub fn fit(regressor: &dyn Regressor, x: &[Vec<f64>], y: &[[f64; NUM_LABELS]], seed: u64) -> Result<Self> {
        if y.len() < 2 {
            return Err(WamError::Config("baselines need at least two training samples".into()));
        }
        let models = (0..NUM_LABELS)
            .into_par_iter()
            .map(|l| {
                let col: Vec<f64> = y.iter().map(|r| r[l]).collect();
                regressor.fit(x, &col, seeds::derive(seed, &[stream::BOOTSTRAP, l as u64]))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MultiOutput {
            method: regressor.name().to_string(),
            models,
        })
    }

    pub fn predict(&self, x: &[f64]) -> [f64; NUM_LABELS] {
        std::array::from_fn(|l| self.models[l].predict(x))
    }

    pub fn predict_all(&self, x: &[Vec<f64>]) -> Vec<[f64; NUM_LABELS]> {
        x.iter().map(|r| self.predict(r)).collect()
    }
}

/// Named baseline strategies in presentation order.
#[derive(Debug)]
pub struct BaselineRegistry {
    entries: Vec<Box<dyn Regressor>>,
}

impl Default for BaselineRegistry {
    fn default() -> Self {
        let mut r = BaselineRegistry::empty();
        r.register(Box::new(AverageRegressor));
        r.register(Box::new(TreeRegressor::default()));
        r.register(Box::new(GBoostRegressor::default()));
        r.register(Box::new(ForestRegressor::default()));
        r
    }
}

impl BaselineRegistry {
    pub fn empty() -> Self {
        BaselineRegistry { entries: Vec::new() }
    }

    /// Adds a strategy, replacing any with the same name.
    pub fn register(&mut self, r: Box<dyn Regressor>) {
        match self.entries.iter().position(|e| e.name() == r.name()) {
            Some(i) => self.entries[i] = r,
            None => self.entries.push(r),
        }
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.name().to_string()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn Regressor> {
        self.entries.iter().map(|e| e.as_ref())
    }

    pub fn get(&self, name: &str) -> Result<&dyn Regressor> {
        self.iter().find(|e| e.name() == name).ok_or_else(|| WamError::Unknown {
            kind: "baseline",
            name: name.to_string(),
            known: self.names().join(", "),
        })
    }
}
