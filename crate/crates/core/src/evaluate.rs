//! Error metrics, the walk-forward harness and the evaluation grid.
//!
//! Walk-forward evaluation is augmented out-of-sample: after each tested
//! row the row joins the training set and the model is refit from scratch
//! before the next prediction.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arimax::{fit_arimax, forecast, ArimaxError, ArimaxOrder};
use crate::ingest::{assemble_dataset, DatasetRow, FeatureSet, IngestError, InteractionTable, ModelDataset, PollBook, SubjectId};
use crate::optim::SimplexSettings;
use crate::regressors::{self, RegressorError, RegressorKind, RegressorSpec};
use crate::rng;
use crate::series::{Anchors, DayIndex};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{predicted} predictions but {actual} actual values")]
    LengthMismatch { predicted: usize, actual: usize },
    #[error("metrics need at least one value")]
    EmptyInput,
    #[error("dataset of {rows} rows is too small: need {required}")]
    DatasetTooSmall { rows: usize, required: usize },
    #[error("invalid evaluation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Regressor(#[from] RegressorError),
    #[error(transparent)]
    Arimax(#[from] ArimaxError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("csv output failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Mae,
    Rmse,
}

impl Metric {
    pub fn compute(self, predicted: &[f64], actual: &[f64]) -> Result<f64, EvalError> {
        match self {
            Metric::Mae => mae(predicted, actual),
            Metric::Rmse => rmse(predicted, actual),
        }
    }
}

fn check_pair(predicted: &[f64], actual: &[f64]) -> Result<(), EvalError> {
    if predicted.len() != actual.len() {
        return Err(EvalError::LengthMismatch {
            predicted: predicted.len(),
            actual: actual.len(),
        });
    }
    if predicted.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(predicted: &[f64], actual: &[f64]) -> Result<f64, EvalError> {
    check_pair(predicted, actual)?;
    let total: f64 = predicted.iter().zip(actual).map(|(p, a)| (p - a).abs()).sum();
    Ok(total / predicted.len() as f64)
}

/// Root mean squared error.
pub fn rmse(predicted: &[f64], actual: &[f64]) -> Result<f64, EvalError> {
    check_pair(predicted, actual)?;
    let total: f64 = predicted.iter().zip(actual).map(|(p, a)| (p - a).powi(2)).sum();
    Ok((total / predicted.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    RandomForest,
    GradientBoosting,
    Arimax,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Linear,
        ModelKind::RandomForest,
        ModelKind::GradientBoosting,
        ModelKind::Arimax,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::RandomForest => "random_forest",
            ModelKind::GradientBoosting => "gradient_boosting",
            ModelKind::Arimax => "arimax",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.label() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown model {s:?}"))
    }
}

/// A model family with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSpec {
    Regressor(RegressorSpec),
    Arimax {
        order: ArimaxOrder,
        #[serde(skip, default)]
        settings: SimplexSettings,
    },
}

impl ModelSpec {
    /// Default hyperparameters for `kind`.
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Linear => ModelSpec::Regressor(RegressorSpec::linear()),
            ModelKind::RandomForest => ModelSpec::Regressor(RegressorSpec::random_forest()),
            ModelKind::GradientBoosting => ModelSpec::Regressor(RegressorSpec::gradient_boosting()),
            ModelKind::Arimax => ModelSpec::Arimax {
                order: ArimaxOrder::default(),
                settings: SimplexSettings::default(),
            },
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Regressor(spec) => match spec.kind {
                RegressorKind::Linear => ModelKind::Linear,
                RegressorKind::RandomForest => ModelKind::RandomForest,
                RegressorKind::GradientBoosting => ModelKind::GradientBoosting,
            },
            ModelSpec::Arimax { .. } => ModelKind::Arimax,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            ModelSpec::Regressor(spec) => ModelSpec::Regressor(spec.with_seed(seed)),
            other => other,
        }
    }
}

/// Anything that can be refit on a growing training prefix.
pub trait Forecaster: Sync {
    /// Fewest training rows a fit accepts.
    fn min_train_rows(&self, n_features: usize) -> usize;

    /// Fits on `train` and predicts the target of `ahead.last()`, where
    /// `ahead` holds the rows between the end of `train` and the target.
    fn fit_predict(&self, train: &[DatasetRow], ahead: &[DatasetRow]) -> Result<f64, EvalError>;
}

impl Forecaster for ModelSpec {
    fn min_train_rows(&self, n_features: usize) -> usize {
        match self {
            ModelSpec::Regressor(_) => 2,
            ModelSpec::Arimax { order, .. } => order.min_observations(n_features),
        }
    }

    fn fit_predict(&self, train: &[DatasetRow], ahead: &[DatasetRow]) -> Result<f64, EvalError> {
        let target = ahead.last().expect("at least one row ahead");
        match self {
            ModelSpec::Regressor(spec) => {
                let x: Vec<Vec<f64>> = train.iter().map(|r| r.features.clone()).collect();
                let y: Vec<f64> = train.iter().map(|r| r.target).collect();
                let model = regressors::fit(spec, &x, &y)?;
                Ok(model.predict(&target.features)?)
            }
            ModelSpec::Arimax { order, settings } => {
                let y: Vec<f64> = train.iter().map(|r| r.target).collect();
                let with_exog = !target.features.is_empty();
                let x: Vec<Vec<f64>> = train.iter().map(|r| r.features.clone()).collect();
                let fit = fit_arimax(&y, with_exog.then_some(x.as_slice()), *order, *settings)?;
                let future: Vec<Vec<f64>> = ahead.iter().map(|r| r.features.clone()).collect();
                let path = forecast(&fit, ahead.len(), with_exog.then_some(future.as_slice()))?;
                Ok(*path.last().expect("horizon >= 1"))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WalkForwardConfig {
    pub initial_train_fraction: f64,
    /// Keeps only the most recent rows for training when set.
    pub max_train_rows: Option<usize>,
    pub horizon_steps: usize,
}

impl Default for WalkForwardConfig {
    fn default() -> Self {
        WalkForwardConfig {
            initial_train_fraction: 0.8,
            max_train_rows: None,
            horizon_steps: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub anchor: DayIndex,
    pub predicted: f64,
    pub actual: f64,
    pub train_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkForward {
    pub steps: Vec<StepRecord>,
    pub mae: f64,
    pub rmse: f64,
}

/// Expanding-window evaluation over `dataset`: train on the first
/// `ceil(fraction * n)` rows, predict `horizon_steps` rows ahead, append one
/// row, refit, repeat until the data runs out.
pub fn walk_forward<F: Forecaster + ?Sized>(
    dataset: &ModelDataset,
    model: &F,
    config: &WalkForwardConfig,
) -> Result<WalkForward, EvalError> {
    let frac = config.initial_train_fraction;
    if !(frac > 0.0 && frac < 1.0) {
        return Err(EvalError::InvalidConfig(format!(
            "initial_train_fraction {frac} must be in (0, 1)"
        )));
    }
    let h = config.horizon_steps;
    if h == 0 {
        return Err(EvalError::InvalidConfig("horizon_steps must be at least 1".into()));
    }
    if config.max_train_rows == Some(0) {
        return Err(EvalError::InvalidConfig("max_train_rows must be positive".into()));
    }
    let rows = dataset.rows();
    let n = rows.len();
    let initial = (frac * n as f64).ceil() as usize;
    let min_train = model.min_train_rows(dataset.feature_names().len());
    let train_floor = config.max_train_rows.map_or(initial, |cap| initial.min(cap));
    if train_floor < min_train || initial + h > n {
        return Err(EvalError::DatasetTooSmall {
            rows: n,
            required: ((min_train + h) as f64 / frac).ceil().max((min_train + h) as f64) as usize,
        });
    }

    let mut steps = Vec::with_capacity(n - initial - h + 1);
    for end in initial..=n - h {
        let start = config.max_train_rows.map_or(0, |cap| end.saturating_sub(cap));
        let train = &rows[start..end];
        let ahead = &rows[end..end + h];
        let target = &ahead[h - 1];
        let predicted = model.fit_predict(train, ahead)?;
        steps.push(StepRecord {
            anchor: target.anchor,
            predicted,
            actual: target.target,
            train_size: train.len(),
        });
    }
    let predicted: Vec<f64> = steps.iter().map(|s| s.predicted).collect();
    let actual: Vec<f64> = steps.iter().map(|s| s.actual).collect();
    Ok(WalkForward {
        mae: mae(&predicted, &actual)?,
        rmse: rmse(&predicted, &actual)?,
        steps,
    })
}

pub const DEFAULT_WINDOWS: [usize; 10] = [1, 2, 3, 4, 5, 6, 7, 14, 21, 28];

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub windows: Vec<usize>,
    pub feature_sets: Vec<FeatureSet>,
    pub models: Vec<ModelSpec>,
    pub anchors: Anchors,
    pub walk_forward: WalkForwardConfig,
    pub seed: u64,
}

impl Default for GridConfig {
    /// All ten windows, four feature sets and four model families.
    fn default() -> Self {
        GridConfig {
            windows: DEFAULT_WINDOWS.to_vec(),
            feature_sets: FeatureSet::ALL.to_vec(),
            models: ModelKind::ALL.into_iter().map(ModelSpec::default_for).collect(),
            anchors: Anchors::default(),
            walk_forward: WalkForwardConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub feature_set: FeatureSet,
    pub window: usize,
    pub model: ModelKind,
    pub mae: f64,
    pub rmse: f64,
    pub steps: usize,
}

/// A cell that could not be evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub feature_set: FeatureSet,
    pub window: usize,
    pub model: ModelKind,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalGrid {
    pub cells: Vec<GridCell>,
    pub failures: Vec<CellFailure>,
}

impl EvalGrid {
    pub fn get(&self, feature_set: FeatureSet, window: usize, model: ModelKind) -> Option<&GridCell> {
        self.cells
            .iter()
            .find(|c| c.feature_set == feature_set && c.window == window && c.model == model)
    }

    /// CSV with header `feature_set,window,model,mae,rmse,steps`, metrics at
    /// six decimals.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<(), EvalError> {
        writeln!(writer, "feature_set,window,model,mae,rmse,steps")?;
        for c in &self.cells {
            writeln!(
                writer,
                "{},{},{},{:.6},{:.6},{}",
                c.feature_set, c.window, c.model, c.mae, c.rmse, c.steps
            )?;
        }
        Ok(())
    }
}

/// Seed used for one grid cell, so cells are reproducible in isolation.
pub fn cell_seed(master: u64, feature_set: FeatureSet, window: usize, model: ModelKind) -> u64 {
    let label = format!("{}/{}/{}", feature_set.label(), window, model.label());
    rng::derive_seed(master, rng::label_tag(&label))
}

/// One walk-forward per (feature set, window, model). Cells whose dataset
/// cannot be assembled or evaluated are recorded in `failures`.
pub fn run_grid(
    table: &InteractionTable,
    polls: &PollBook,
    subject: &SubjectId,
    config: &GridConfig,
) -> Result<EvalGrid, EvalError> {
    if config.windows.iter().any(|&w| w == 0) {
        return Err(EvalError::InvalidConfig("windows must be positive".into()));
    }
    if !table.contains(subject) {
        return Err(IngestError::UnknownSubject(subject.to_string()).into());
    }
    let mut jobs = Vec::new();
    let mut failures = Vec::new();
    for &fs in &config.feature_sets {
        for &w in &config.windows {
            match assemble_dataset(table, polls, subject, fs, w, config.anchors) {
                Ok(ds) => {
                    let ds = std::sync::Arc::new(ds);
                    for model in &config.models {
                        jobs.push((fs, w, *model, ds.clone()));
                    }
                }
                Err(e @ (IngestError::InsufficientOverlap { .. } | IngestError::Series(_))) => {
                    for model in &config.models {
                        failures.push(CellFailure {
                            feature_set: fs,
                            window: w,
                            model: model.kind(),
                            reason: e.to_string(),
                        });
                    }
                }
                Err(e) => return Err(e.into()),
            }
        }
    }

    let outcomes: Vec<Result<GridCell, CellFailure>> = jobs
        .par_iter()
        .map(|(fs, w, model, ds)| {
            let kind = model.kind();
            let spec = model.with_seed(cell_seed(config.seed, *fs, *w, kind));
            walk_forward(ds, &spec, &config.walk_forward)
                .map(|wf| GridCell {
                    feature_set: *fs,
                    window: *w,
                    model: kind,
                    mae: wf.mae,
                    rmse: wf.rmse,
                    steps: wf.steps.len(),
                })
                .map_err(|e| CellFailure {
                    feature_set: *fs,
                    window: *w,
                    model: kind,
                    reason: e.to_string(),
                })
        })
        .collect();
    let mut grid = EvalGrid::default();
    for outcome in outcomes {
        match outcome {
            Ok(cell) => grid.cells.push(cell),
            Err(f) => failures.push(f),
        }
    }
    let order = |fs: FeatureSet, w: usize, m: ModelKind| {
        (FeatureSet::ALL.iter().position(|&x| x == fs), w, m)
    };
    grid.cells.sort_by_key(|c| order(c.feature_set, c.window, c.model));
    failures.sort_by_key(|c| order(c.feature_set, c.window, c.model));
    grid.failures = failures;
    Ok(grid)
}
