//! Supervised regressors behind one fit/predict surface: ordinary least
//! squares, regression trees, random forests and gradient boosting.
//!
//! All fits are deterministic given `(data, spec, seed)`. Ensemble members
//! draw from independent random streams addressed by member index.

mod ensemble;
mod linear;
mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ensemble::{BoostedTrees, Forest};
pub use linear::LinearModel;
pub use tree::{RegressionTree, TreeParams};

use rand::Rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressorError {
    #[error("cannot fit on an empty dataset")]
    EmptyDataset,
    #[error("non-finite value in inputs")]
    NonFiniteInput,
    #[error("{rows} rows but {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("row {row} has {got} features, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("invalid regressor spec: {0}")]
    InvalidSpec(String),
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressorKind {
    Linear,
    RandomForest,
    GradientBoosting,
}

/// How many features each split may consider.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubsample {
    All,
    /// `ceil(sqrt(m))` of `m` features.
    Sqrt,
    /// `ceil(fraction * m)` features, `0 < fraction <= 1`.
    Fraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressorSpec {
    pub kind: RegressorKind,
    pub tree_count: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub learning_rate: f64,
    pub feature_subsample: FeatureSubsample,
    pub bootstrap: bool,
    pub seed: u64,
}

impl RegressorSpec {
    pub fn linear() -> Self {
        RegressorSpec {
            kind: RegressorKind::Linear,
            tree_count: 1,
            max_depth: 1,
            min_samples_leaf: 1,
            learning_rate: 1.0,
            feature_subsample: FeatureSubsample::All,
            bootstrap: false,
            seed: 0,
        }
    }

    /// 100 trees, depth 8, at least 2 rows per leaf, sqrt feature subsampling.
    pub fn random_forest() -> Self {
        RegressorSpec {
            kind: RegressorKind::RandomForest,
            tree_count: 100,
            max_depth: 8,
            min_samples_leaf: 2,
            learning_rate: 1.0,
            feature_subsample: FeatureSubsample::Sqrt,
            bootstrap: true,
            seed: 0,
        }
    }

    /// 100 stages of depth-3 trees with learning rate 0.1.
    pub fn gradient_boosting() -> Self {
        RegressorSpec {
            kind: RegressorKind::GradientBoosting,
            tree_count: 100,
            max_depth: 3,
            min_samples_leaf: 1,
            learning_rate: 0.1,
            feature_subsample: FeatureSubsample::All,
            bootstrap: false,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), RegressorError> {
        let bad = |m: &str| Err(RegressorError::InvalidSpec(m.to_string()));
        if self.kind == RegressorKind::Linear {
            return Ok(());
        }
        if self.tree_count < 1 {
            return bad("tree_count must be at least 1");
        }
        if self.max_depth < 1 {
            return bad("max_depth must be at least 1");
        }
        if self.min_samples_leaf < 1 {
            return bad("min_samples_leaf must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must be in (0, 1]");
        }
        if let FeatureSubsample::Fraction(f) = self.feature_subsample {
            if !(f > 0.0 && f <= 1.0) {
                return bad("feature_subsample fraction must be in (0, 1]");
            }
        }
        Ok(())
    }

    pub(crate) fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            feature_subsample: self.feature_subsample,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedRegressor {
    Linear(LinearModel),
    Tree(RegressionTree),
    Forest(Forest),
    Boosting(BoostedTrees),
}

impl FittedRegressor {
    pub fn n_features(&self) -> usize {
        match self {
            FittedRegressor::Linear(m) => m.coefficients.len(),
            FittedRegressor::Tree(t) => t.n_features(),
            FittedRegressor::Forest(f) => f.n_features(),
            FittedRegressor::Boosting(b) => b.n_features(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, RegressorError> {
        let expected = self.n_features();
        if x.len() != expected {
            return Err(RegressorError::DimensionMismatch {
                expected,
                got: x.len(),
            });
        }
        Ok(match self {
            FittedRegressor::Linear(m) => m.predict_row(x),
            FittedRegressor::Tree(t) => t.predict_row(x),
            FittedRegressor::Forest(f) => f.predict_row(x),
            FittedRegressor::Boosting(b) => b.predict_row(x),
        })
    }

    pub fn predict_many(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>, RegressorError> {
        rows.iter().map(|r| self.predict(r)).collect()
    }
}

/// Checks shape and finiteness; returns the feature count.
fn check_inputs(x: &[Vec<f64>], y: &[f64]) -> Result<usize, RegressorError> {
    if x.is_empty() || y.is_empty() {
        return Err(RegressorError::EmptyDataset);
    }
    if x.len() != y.len() {
        return Err(RegressorError::LengthMismatch {
            rows: x.len(),
            targets: y.len(),
        });
    }
    let m = x[0].len();
    for (row, r) in x.iter().enumerate() {
        if r.len() != m {
            return Err(RegressorError::RaggedRows {
                row,
                expected: m,
                got: r.len(),
            });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(RegressorError::NonFiniteInput);
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(RegressorError::NonFiniteInput);
    }
    Ok(m)
}

pub fn fit_linear(x: &[Vec<f64>], y: &[f64]) -> Result<FittedRegressor, RegressorError> {
    check_inputs(x, y)?;
    Ok(FittedRegressor::Linear(linear::solve(x, y)))
}

/// Single regression tree. `rng` is consulted only when
/// `params.feature_subsample` restricts the features considered per split.
pub fn fit_tree<R: Rng>(
    x: &[Vec<f64>],
    y: &[f64],
    params: TreeParams,
    rng: &mut R,
) -> Result<FittedRegressor, RegressorError> {
    check_inputs(x, y)?;
    if params.max_depth < 1 || params.min_samples_leaf < 1 {
        return Err(RegressorError::InvalidSpec(
            "max_depth and min_samples_leaf must be at least 1".into(),
        ));
    }
    let design = tree::SortedDesign::new(x);
    Ok(FittedRegressor::Tree(tree::grow_tree(
        &design,
        y,
        &vec![1.0; y.len()],
        params,
        rng,
    )))
}

pub fn fit_forest(x: &[Vec<f64>], y: &[f64], spec: &RegressorSpec) -> Result<FittedRegressor, RegressorError> {
    check_inputs(x, y)?;
    spec.validate()?;
    Ok(FittedRegressor::Forest(ensemble::fit_forest(x, y, spec)))
}

pub fn fit_boosting(x: &[Vec<f64>], y: &[f64], spec: &RegressorSpec) -> Result<FittedRegressor, RegressorError> {
    check_inputs(x, y)?;
    spec.validate()?;
    Ok(FittedRegressor::Boosting(ensemble::fit_boosting(x, y, spec)))
}

/// Dispatches on `spec.kind`.
pub fn fit(spec: &RegressorSpec, x: &[Vec<f64>], y: &[f64]) -> Result<FittedRegressor, RegressorError> {
    match spec.kind {
        RegressorKind::Linear => fit_linear(x, y),
        RegressorKind::RandomForest => fit_forest(x, y, spec),
        RegressorKind::GradientBoosting => fit_boosting(x, y, spec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn full_tree(depth: usize) -> TreeParams {
        TreeParams {
            max_depth: depth,
            min_samples_leaf: 1,
            feature_subsample: FeatureSubsample::All,
        }
    }

    #[test]
    fn linear_prediction() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0]];
        let m = fit_linear(&x, &[1.0, 4.0, 7.0]).unwrap();
        assert!((m.predict(&[2.0]).unwrap() - 7.0).abs() < 1e-12);
        for (row, y) in x.iter().zip([1.0, 4.0, 7.0]) {
            assert!((m.predict(row).unwrap() - y).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicated_constant_column_does_not_change_predictions() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let y = [1.0, 3.0, 2.0, 5.0, 4.0, 7.0];
        let with_dup: Vec<Vec<f64>> = x
            .iter()
            .map(|r| vec![r[0], r[1], 4.0, 4.0])
            .collect();
        let a = fit_linear(&x, &y).unwrap();
        let b = fit_linear(&with_dup, &y).unwrap();
        for (r, rd) in x.iter().zip(&with_dup) {
            assert!((a.predict(r).unwrap() - b.predict(rd).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn input_errors() {
        assert_eq!(fit_linear(&[], &[]), Err(RegressorError::EmptyDataset));
        assert_eq!(
            fit_linear(&[vec![f64::NAN]], &[1.0]),
            Err(RegressorError::NonFiniteInput)
        );
        assert_eq!(
            fit_tree(&[], &[], full_tree(2), &mut rng::stream(0, 0)),
            Err(RegressorError::EmptyDataset)
        );
        let m = fit_linear(&[vec![1.0, 2.0]], &[1.0]).unwrap();
        assert_eq!(
            m.predict(&[1.0]),
            Err(RegressorError::DimensionMismatch { expected: 2, got: 1 })
        );
    }

    #[test]
    fn hand_built_tree_boundary_goes_right() {
        let tree = FittedRegressor::Tree(RegressionTree::from_split(0, 4.5, 0.0, 10.0, 1));
        assert_eq!(tree.predict(&[4.5]).unwrap(), 10.0);
        assert_eq!(tree.predict(&[4.4]).unwrap(), 0.0);
    }

    #[test]
    fn spec_validation() {
        let mut spec = RegressorSpec::gradient_boosting();
        spec.tree_count = 0;
        assert!(matches!(spec.validate(), Err(RegressorError::InvalidSpec(_))));
        let mut spec = RegressorSpec::random_forest();
        spec.learning_rate = 0.0;
        assert!(spec.validate().is_err());
        spec.learning_rate = 1.0;
        spec.feature_subsample = FeatureSubsample::Fraction(1.5);
        assert!(spec.validate().is_err());
        let x = vec![vec![0.0], vec![1.0]];
        let mut boost = RegressorSpec::gradient_boosting();
        boost.tree_count = 0;
        assert!(fit_boosting(&x, &[0.0, 1.0], &boost).is_err());
    }
}
