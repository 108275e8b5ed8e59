use rand::seq::index::sample;
use rand::Rng;

use super::{FittedModel, Regressor};
use crate::Result;

/// Growth limits for a regression tree.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features drawn per split; `None` considers all of them.
    pub max_features: Option<usize>,
}

impl TreeParams {
    pub fn unlimited() -> Self {
        TreeParams {
            max_depth: None,
            min_leaf: 1,
            max_features: None,
        }
    }
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: Some(12),
            min_leaf: 2,
            max_features: None,
        }
    }
}

#[derive(Clone, Debug)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// CART regression tree grown by greedy variance reduction.
#[derive(Clone, Debug)]
pub struct Tree {
    nodes: Vec<Node>,
}

struct Builder<'a, R> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    params: &'a TreeParams,
    rng: Option<&'a mut R>,
    nodes: Vec<Node>,
}

struct Split {
    feature: usize,
    threshold: f64,
    /// Rows sorted by the split feature; the first `at` go left.
    order: Vec<usize>,
    at: usize,
}

impl<R: Rng> Builder<'_, R> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let mean = rows.iter().map(|&i| self.y[i]).sum::<f64>() / rows.len() as f64;
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(mean));
        let pure = rows.iter().all(|&i| self.y[i] == self.y[rows[0]]);
        let deep = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || deep || rows.len() < 2 * self.params.min_leaf.max(1) {
            return id;
        }
        let Some(split) = self.best_split(&rows) else {
            return id;
        };
        let (l, r) = split.order.split_at(split.at);
        let left = self.grow(l.to_vec(), depth + 1);
        let right = self.grow(r.to_vec(), depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.x[0].len();
        match (self.params.max_features, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < d => {
                let mut f = sample(rng, d, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    fn best_split(&mut self, rows: &[usize]) -> Option<Split> {
        let min_leaf = self.params.min_leaf.max(1);
        let n = rows.len();
        let total: f64 = rows.iter().map(|&i| self.y[i]).sum();
        let mut best: Option<(f64, Split)> = None;
        for f in self.candidate_features() {
            let mut order = rows.to_vec();
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let mut left_sum = 0.0;
            let mut found: Option<(f64, usize)> = None;
            for at in 1..n {
                left_sum += self.y[order[at - 1]];
                if at < min_leaf || n - at < min_leaf {
                    continue;
                }
                let (a, b) = (self.x[order[at - 1]][f], self.x[order[at]][f]);
                if a >= b {
                    continue;
                }
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / at as f64 + right_sum * right_sum / (n - at) as f64;
                if found.is_none_or(|(s, _)| score > s) {
                    found = Some((score, at));
                }
            }
            if let Some((score, at)) = found {
                if best.as_ref().is_none_or(|(s, _)| score > *s) {
                    let (a, b) = (self.x[order[at - 1]][f], self.x[order[at]][f]);
                    let mid = a + (b - a) / 2.0;
                    let threshold = if mid < b { mid } else { a };
                    best = Some((
                        score,
                        Split {
                            feature: f,
                            threshold,
                            order,
                            at,
                        },
                    ));
                }
            }
        }
        best.map(|(_, s)| s)
    }
}

impl Tree {
    /// Fits on the listed rows; duplicates act as sample weights.
    pub fn fit<R: Rng>(x: &[Vec<f64>], y: &[f64], rows: Vec<usize>, params: &TreeParams, rng: Option<&mut R>) -> Tree {
        assert!(!rows.is_empty(), "a tree needs at least one row");
        let mut b = Builder {
            x,
            y,
            params,
            rng,
            nodes: Vec::new(),
        };
        b.grow(rows, 0);
        Tree { nodes: b.nodes }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

impl FittedModel for Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        Tree::predict(self, x)
    }
}

/// Single decision tree.
#[derive(Clone, Debug, Default)]
pub struct TreeRegressor {
    pub params: TreeParams,
}

impl Regressor for TreeRegressor {
    fn name(&self) -> &str {
        "tree"
    }

    fn describe(&self) -> String {
        format!(
            "max_depth={:?} min_leaf={}",
            self.params.max_depth, self.params.min_leaf
        )
    }

    fn fit(&self, x: &[Vec<f64>], y: &[f64], _seed: u64) -> Result<Box<dyn FittedModel>> {
        super::check_fit_input(x, y)?;
        let tree = Tree::fit::<rand_chacha::ChaCha8Rng>(x, y, (0..y.len()).collect(), &self.params, None);
        Ok(Box::new(tree))
    }
}
