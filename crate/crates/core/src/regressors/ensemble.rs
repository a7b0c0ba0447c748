//! Tree ensembles: bagged random forests and squared-loss gradient boosting.

use rand::Rng;
use rayon::prelude::*;

use super::tree::{grow_tree, RegressionTree, SortedDesign};
use super::RegressorSpec;
use crate::rng;

/// Mean of independently grown trees.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    spec: RegressorSpec,
    trees: Vec<RegressionTree>,
}

impl Forest {
    pub fn spec(&self) -> &RegressorSpec {
        &self.spec
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn n_features(&self) -> usize {
        self.trees[0].n_features()
    }

    /// Builds a forest from already grown trees.
    pub fn from_trees(spec: RegressorSpec, trees: Vec<RegressionTree>) -> Self {
        assert!(!trees.is_empty(), "a forest needs at least one tree");
        Forest { spec, trees }
    }

    pub(crate) fn predict_row(&self, x: &[f64]) -> f64 {
        let total: f64 = self.trees.iter().map(|t| t.predict_row(x)).sum();
        total / self.trees.len() as f64
    }
}

fn bootstrap_weights<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut counts = vec![0.0; n];
    for _ in 0..n {
        counts[rng.random_range(0..n)] += 1.0;
    }
    counts
}

pub(super) fn fit_forest(x: &[Vec<f64>], y: &[f64], spec: &RegressorSpec) -> Forest {
    let design = SortedDesign::new(x);
    let params = spec.tree_params();
    let trees = (0..spec.tree_count)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(spec.seed, t as u64);
            let weight = if spec.bootstrap {
                bootstrap_weights(y.len(), &mut rng)
            } else {
                vec![1.0; y.len()]
            };
            grow_tree(&design, y, &weight, params, &mut rng)
        })
        .collect();
    Forest { spec: *spec, trees }
}

/// `base + learning_rate * sum(trees)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostedTrees {
    spec: RegressorSpec,
    base: f64,
    trees: Vec<RegressionTree>,
}

impl BoostedTrees {
    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn n_features(&self) -> usize {
        self.trees[0].n_features()
    }

    pub(crate) fn predict_row(&self, x: &[f64]) -> f64 {
        self.predict_stages(x, self.trees.len())
    }

    /// Prediction using only the first `stages` trees.
    pub fn predict_stages(&self, x: &[f64], stages: usize) -> f64 {
        let lr = self.spec.learning_rate;
        self.trees[..stages.min(self.trees.len())]
            .iter()
            .fold(self.base, |acc, t| acc + lr * t.predict_row(x))
    }
}

pub(super) fn fit_boosting(x: &[Vec<f64>], y: &[f64], spec: &RegressorSpec) -> BoostedTrees {
    let design = SortedDesign::new(x);
    let params = spec.tree_params();
    let n = y.len();
    let base = y.iter().sum::<f64>() / n as f64;
    let mut fitted = vec![base; n];
    let mut residual = vec![0.0; n];
    let mut trees = Vec::with_capacity(spec.tree_count);
    for stage in 0..spec.tree_count {
        for i in 0..n {
            residual[i] = y[i] - fitted[i];
        }
        let mut rng = rng::stream(spec.seed, stage as u64);
        let weight = if spec.bootstrap {
            bootstrap_weights(n, &mut rng)
        } else {
            vec![1.0; n]
        };
        let tree = grow_tree(&design, &residual, &weight, params, &mut rng);
        for (f, row) in fitted.iter_mut().zip(x) {
            *f += spec.learning_rate * tree.predict_row(row);
        }
        trees.push(tree);
    }
    BoostedTrees {
        spec: *spec,
        base,
        trees,
    }
}
