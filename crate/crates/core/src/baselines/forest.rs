use rand::Rng;
use rayon::prelude::*;

use super::tree::{Tree, TreeParams};
use super::{FittedModel, Regressor};
use crate::seeds;
use crate::Result;

/// Bootstrap-bagged trees with per-split feature subsampling.
#[derive(Clone, Debug)]
pub struct ForestRegressor {
    pub trees: usize,
    /// Member growth limits; `max_features: None` means the square root of
    /// the feature count.
    pub params: TreeParams,
}

impl Default for ForestRegressor {
    fn default() -> Self {
        ForestRegressor {
            trees: 100,
            params: TreeParams::unlimited(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Forest {
    pub members: Vec<Tree>,
}

impl FittedModel for Forest {
    fn predict(&self, x: &[f64]) -> f64 {
        self.members.iter().map(|t| t.predict(x)).sum::<f64>() / self.members.len() as f64
    }
}

impl Regressor for ForestRegressor {
    fn name(&self) -> &str {
        "forest"
    }

    fn describe(&self) -> String {
        format!(
            "trees={} max_features={} max_depth={:?} min_leaf={}",
            self.trees,
            self.params.max_features.map_or("sqrt".to_string(), |m| m.to_string()),
            self.params.max_depth,
            self.params.min_leaf
        )
    }

    fn fit(&self, x: &[Vec<f64>], y: &[f64], seed: u64) -> Result<Box<dyn FittedModel>> {
        Ok(Box::new(self.fit_forest(x, y, seed)?))
    }
}

impl ForestRegressor {
    pub fn fit_forest(&self, x: &[Vec<f64>], y: &[f64], seed: u64) -> Result<Forest> {
        super::check_fit_input(x, y)?;
        let d = x[0].len();
        let params = TreeParams {
            max_features: Some(
                self.params
                    .max_features
                    .unwrap_or(((d as f64).sqrt().round() as usize).max(1)),
            ),
            ..self.params.clone()
        };
        let n = y.len();
        let members = (0..self.trees.max(1))
            .into_par_iter()
            .map(|t| {
                let mut rng = seeds::rng(seed, &[t as u64]);
                let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                Tree::fit(x, y, rows, &params, Some(&mut rng))
            })
            .collect();
        Ok(Forest { members })
    }
}
