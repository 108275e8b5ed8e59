use super::tree::{Tree, TreeParams};
use super::{FittedModel, Regressor};
use crate::Result;

/// Stagewise least-squares boosting of shallow trees.
#[derive(Clone, Debug)]
pub struct GBoostRegressor {
    pub rounds: usize,
    pub shrinkage: f64,
    pub depth: usize,
}

impl Default for GBoostRegressor {
    fn default() -> Self {
        GBoostRegressor {
            rounds: 200,
            shrinkage: 0.1,
            depth: 3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Boosted {
    pub base: f64,
    pub shrinkage: f64,
    pub stages: Vec<Tree>,
}

impl FittedModel for Boosted {
    fn predict(&self, x: &[f64]) -> f64 {
        self.base + self.stages.iter().map(|t| self.shrinkage * t.predict(x)).sum::<f64>()
    }
}

impl GBoostRegressor {
    /// Fits and returns the training mean squared error after every round,
    /// starting with the constant model.
    pub fn fit_boosted(&self, x: &[Vec<f64>], y: &[f64]) -> Result<(Boosted, Vec<f64>)> {
        super::check_fit_input(x, y)?;
        let n = y.len();
        let base = y.iter().sum::<f64>() / n as f64;
        let mut current = vec![base; n];
        let params = TreeParams {
            max_depth: Some(self.depth),
            min_leaf: 1,
            max_features: None,
        };
        let loss = |cur: &[f64]| cur.iter().zip(y).map(|(p, t)| (t - p).powi(2)).sum::<f64>() / n as f64;
        let mut history = vec![loss(&current)];
        let mut stages = Vec::with_capacity(self.rounds);
        for _ in 0..self.rounds {
            let residual: Vec<f64> = y.iter().zip(&current).map(|(t, p)| t - p).collect();
            let tree = Tree::fit::<rand_chacha::ChaCha8Rng>(x, &residual, (0..n).collect(), &params, None);
            for (c, row) in current.iter_mut().zip(x) {
                *c += self.shrinkage * tree.predict(row);
            }
            history.push(loss(&current));
            stages.push(tree);
        }
        Ok((
            Boosted {
                base,
                shrinkage: self.shrinkage,
                stages,
            },
            history,
        ))
    }
}

impl Regressor for GBoostRegressor {
    fn name(&self) -> &str {
        "gboost"
    }

    fn describe(&self) -> String {
        format!(
            "rounds={} shrinkage={} depth={}",
            self.rounds, self.shrinkage, self.depth
        )
    }

    fn fit(&self, x: &[Vec<f64>], y: &[f64], _seed: u64) -> Result<Box<dyn FittedModel>> {
        Ok(Box::new(self.fit_boosted(x, y)?.0))
    }
}
