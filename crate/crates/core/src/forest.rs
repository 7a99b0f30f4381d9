//! Random forest regression with CART-style trees.
//!
//! Each tree is grown on a random subsample of `⌈r·n⌉` distinct training rows
//! and considers `⌈m·d⌉` randomly chosen features at every split. Tree `i`
//! draws from stream `i` of the forest seed, so forests built with the same
//! seed share their leading trees regardless of size.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, Stream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForestError {
    #[error("invalid forest config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestConfig {
    /// Fraction of training rows each tree sees, in `(0, 1]`.
    pub sample_ratio: f64,
    /// Fraction of features evaluated per split, in `(0, 1]`.
    pub feature_ratio: f64,
    pub n_trees: usize,
    /// `None` grows until `min_leaf` or purity stops the split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            sample_ratio: 0.7,
            feature_ratio: 0.5,
            n_trees: 50,
            max_depth: None,
            min_leaf: 2,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<(), ForestError> {
        let in_unit = |v: f64| v > 0.0 && v <= 1.0;
        if !in_unit(self.sample_ratio) {
            return Err(ForestError::InvalidConfig(format!(
                "sample_ratio {} not in (0, 1]",
                self.sample_ratio
            )));
        }
        if !in_unit(self.feature_ratio) {
            return Err(ForestError::InvalidConfig(format!(
                "feature_ratio {} not in (0, 1]",
                self.feature_ratio
            )));
        }
        if self.n_trees == 0 || self.min_leaf == 0 {
            return Err(ForestError::InvalidConfig(
                "n_trees and min_leaf must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Binary regression tree stored as an arena; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![TreeNode::Leaf { value }],
        }
    }

    fn predict_row(&self, x: &DMatrix<f64>, row: usize) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[(row, feature)] <= threshold { left } else { right },
            }
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_fn(x.nrows(), |i, _| self.predict_row(x, i))
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &RegressionTree, at: usize) -> usize {
            match t.nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(t, left).max(walk(t, right)),
            }
        }
        walk(self, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<RegressionTree>,
    pub config: ForestConfig,
    pub feature_names: Vec<String>,
}

impl ForestModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>, ForestError> {
        self.predict_with_first(self.trees.len(), x)
    }

    /// Mean prediction of the first `k` trees.
    pub fn predict_with_first(&self, k: usize, x: &DMatrix<f64>) -> Result<DVector<f64>, ForestError> {
        if x.ncols() != self.n_features() {
            return Err(ForestError::ShapeMismatch(format!(
                "forest trained on {} features, input has {}",
                self.n_features(),
                x.ncols()
            )));
        }
        let k = k.min(self.trees.len()).max(1);
        let mut sum = DVector::zeros(x.nrows());
        for tree in &self.trees[..k] {
            sum += tree.predict(x);
        }
        Ok(sum / k as f64)
    }
}

pub fn predict_forest(model: &ForestModel, x: &DMatrix<f64>) -> Result<DVector<f64>, ForestError> {
    model.predict(x)
}

struct Grower<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    config: &'a ForestConfig,
    features_per_split: usize,
}

struct Split {
    feature: usize,
    threshold: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

impl Grower<'_> {
    fn mean(&self, rows: &[usize]) -> f64 {
        rows.iter().map(|&r| self.y[r]).sum::<f64>() / rows.len() as f64
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        let first = self.y[rows[0]];
        rows.iter().all(|&r| self.y[r] == first)
    }

    /// Split maximizing `S_l²/n_l + S_r²/n_r`, i.e. minimizing the summed
    /// child squared error. Thresholds sit midway between adjacent distinct
    /// values.
    fn best_split(&self, rows: &[usize], rng: &mut Stream) -> Option<Split> {
        let d = self.x.ncols();
        let min_leaf = self.config.min_leaf;
        let candidates = index::sample(rng, d, self.features_per_split);
        let total: f64 = rows.iter().map(|&r| self.y[r]).sum();
        let n = rows.len();

        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted: Vec<(f64, f64)> = Vec::with_capacity(n);
        for feature in candidates.iter() {
            sorted.clear();
            sorted.extend(rows.iter().map(|&r| (self.x[(r, feature)], self.y[r])));
            sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let mut left_sum = 0.0;
            for i in 0..n - 1 {
                left_sum += sorted[i].1;
                let n_left = i + 1;
                if n_left < min_leaf || n - n_left < min_leaf || sorted[i].0 == sorted[i + 1].0 {
                    continue;
                }
                let right_sum = total - left_sum;
                let score =
                    left_sum * left_sum / n_left as f64 + right_sum * right_sum / (n - n_left) as f64;
                if best.is_none_or(|(s, _, _)| score > s) {
                    best = Some((score, feature, 0.5 * (sorted[i].0 + sorted[i + 1].0)));
                }
            }
        }

        let (_, feature, threshold) = best?;
        let (left, right) = rows
            .iter()
            .partition(|&&r| self.x[(r, feature)] <= threshold);
        Some(Split {
            feature,
            threshold,
            left,
            right,
        })
    }

    fn grow(&self, rows: Vec<usize>, rng: &mut Stream) -> RegressionTree {
        let mut nodes = vec![TreeNode::Leaf { value: 0.0 }];
        let mut stack = vec![(0usize, rows, 0usize)];
        while let Some((at, rows, depth)) = stack.pop() {
            let stop = self.config.max_depth.is_some_and(|m| depth >= m)
                || rows.len() < 2 * self.config.min_leaf
                || self.is_pure(&rows);
            let split = if stop { None } else { self.best_split(&rows, rng) };
            match split {
                None => nodes[at] = TreeNode::Leaf { value: self.mean(&rows) },
                Some(s) => {
                    let left = nodes.len();
                    let right = left + 1;
                    nodes.push(TreeNode::Leaf { value: 0.0 });
                    nodes.push(TreeNode::Leaf { value: 0.0 });
                    nodes[at] = TreeNode::Split {
                        feature: s.feature,
                        threshold: s.threshold,
                        left,
                        right,
                    };
                    // right pushed first so the left subtree is grown first
                    stack.push((right, s.right, depth + 1));
                    stack.push((left, s.left, depth + 1));
                }
            }
        }
        RegressionTree { nodes }
    }
}

/// Fits a forest. Deterministic per `(x, y, config, seed)`.
pub fn fit_random_forest(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    config: &ForestConfig,
    seed: u64,
) -> Result<ForestModel, ForestError> {
    config.validate()?;
    let (n, d) = x.shape();
    if n != y.len() {
        return Err(ForestError::ShapeMismatch(format!(
            "{n} rows but target of length {}",
            y.len()
        )));
    }
    if n < 2 {
        return Err(ForestError::InvalidConfig(format!("need at least 2 rows, got {n}")));
    }
    let feature_names = crate::data::default_feature_names(d);
    if d == 0 {
        let mean = y.mean();
        return Ok(ForestModel {
            trees: vec![RegressionTree::leaf(mean); config.n_trees],
            config: config.clone(),
            feature_names,
        });
    }

    let sample_size = ((config.sample_ratio * n as f64).ceil() as usize).clamp(1, n);
    let grower = Grower {
        x,
        y,
        config,
        features_per_split: ((config.feature_ratio * d as f64).ceil() as usize).clamp(1, d),
    };
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut stream = rng::substream(seed, i as u64);
            let mut rows = index::sample(&mut stream, n, sample_size).into_vec();
            rows.sort_unstable();
            grower.grow(rows, &mut stream)
        })
        .collect();

    Ok(ForestModel {
        trees,
        config: config.clone(),
        feature_names,
    })
}
