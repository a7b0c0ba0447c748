//! Run configuration: an optional JSON file with every field overridable by
//! the flag of the same name.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use votecast::arimax::ArimaxOrder;
use votecast::evaluate::{ModelKind, ModelSpec, WalkForwardConfig, DEFAULT_WINDOWS};
use votecast::ingest::{FeatureSet, SubjectId};
use votecast::optim::SimplexSettings;
use votecast::regressors::RegressorSpec;
use votecast::series::Anchors;

pub const SEED_ENV: &str = "VOTECAST_SEED";

/// Contents of a `--config` file. Absent fields fall back to defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub interactions: Option<PathBuf>,
    pub polls: Option<PathBuf>,
    pub subjects: Option<Vec<String>>,
    pub feature_sets: Option<Vec<String>>,
    pub windows: Option<Vec<usize>>,
    pub models: Option<Vec<String>>,
    pub anchors: Option<String>,
    pub arimax_order: Option<ArimaxOrder>,
    pub random_forest: Option<RegressorSpec>,
    pub gradient_boosting: Option<RegressorSpec>,
    pub initial_train_fraction: Option<f64>,
    pub max_train_rows: Option<usize>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("config {}", path.display()))
    }

    /// Fields set in `overrides` replace ours.
    pub fn overlay(self, overrides: RunConfig) -> RunConfig {
        RunConfig {
            interactions: overrides.interactions.or(self.interactions),
            polls: overrides.polls.or(self.polls),
            subjects: overrides.subjects.or(self.subjects),
            feature_sets: overrides.feature_sets.or(self.feature_sets),
            windows: overrides.windows.or(self.windows),
            models: overrides.models.or(self.models),
            anchors: overrides.anchors.or(self.anchors),
            arimax_order: overrides.arimax_order.or(self.arimax_order),
            random_forest: overrides.random_forest.or(self.random_forest),
            gradient_boosting: overrides.gradient_boosting.or(self.gradient_boosting),
            initial_train_fraction: overrides.initial_train_fraction.or(self.initial_train_fraction),
            max_train_rows: overrides.max_train_rows.or(self.max_train_rows),
            seed: overrides.seed.or(self.seed),
            output_dir: overrides.output_dir.or(self.output_dir),
        }
    }
}

/// A config with every default filled in and every field checked.
#[derive(Debug, Clone)]
pub struct Settings {
    pub interactions: Option<PathBuf>,
    pub polls: Option<PathBuf>,
    pub subjects: Option<Vec<SubjectId>>,
    pub feature_sets: Vec<FeatureSet>,
    pub windows: Vec<usize>,
    pub models: Vec<ModelSpec>,
    pub anchors: Anchors,
    pub walk_forward: WalkForwardConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
}

fn seed_from_env() -> anyhow::Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => Ok(Some(v.trim().parse().with_context(|| format!("{SEED_ENV}={v:?} is not an integer"))?)),
        Err(_) => Ok(None),
    }
}

impl Settings {
    pub fn resolve(config: RunConfig) -> anyhow::Result<Settings> {
        let subjects = config
            .subjects
            .map(|names| {
                names
                    .iter()
                    .map(|n| SubjectId::new(n).with_context(|| "field `subjects`"))
                    .collect::<anyhow::Result<Vec<_>>>()
            })
            .transpose()?;
        let feature_sets = match config.feature_sets {
            None => FeatureSet::ALL.to_vec(),
            Some(v) => v
                .iter()
                .map(|s| s.parse::<FeatureSet>().map_err(|e| anyhow::anyhow!("field `feature_sets`: {e}")))
                .collect::<anyhow::Result<_>>()?,
        };
        let windows = config.windows.unwrap_or_else(|| DEFAULT_WINDOWS.to_vec());
        if windows.is_empty() || windows.contains(&0) {
            bail!("field `windows`: need at least one positive window");
        }
        let order = config.arimax_order.unwrap_or_default();
        let kinds: Vec<ModelKind> = match config.models {
            None => ModelKind::ALL.to_vec(),
            Some(v) => v
                .iter()
                .map(|s| s.parse::<ModelKind>().map_err(|e| anyhow::anyhow!("field `models`: {e}")))
                .collect::<anyhow::Result<_>>()?,
        };
        if kinds.is_empty() {
            bail!("field `models`: need at least one model");
        }
        let models = kinds
            .into_iter()
            .map(|kind| {
                let spec = match kind {
                    ModelKind::Arimax => ModelSpec::Arimax {
                        order,
                        settings: SimplexSettings::default(),
                    },
                    ModelKind::RandomForest => {
                        ModelSpec::Regressor(config.random_forest.unwrap_or_else(RegressorSpec::random_forest))
                    }
                    ModelKind::GradientBoosting => {
                        ModelSpec::Regressor(config.gradient_boosting.unwrap_or_else(RegressorSpec::gradient_boosting))
                    }
                    ModelKind::Linear => ModelSpec::default_for(kind),
                };
                if let ModelSpec::Regressor(r) = &spec {
                    r.validate().with_context(|| format!("field `{}`", kind.label()))?;
                    if spec.kind() != kind {
                        bail!("field `{}`: spec kind does not match", kind.label());
                    }
                }
                Ok(spec)
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        let anchors = match config.anchors {
            None => Anchors::default(),
            Some(a) => a.parse().map_err(|e| anyhow::anyhow!("field `anchors`: {e}"))?,
        };
        let mut walk_forward = WalkForwardConfig::default();
        if let Some(f) = config.initial_train_fraction {
            if !(f > 0.0 && f < 1.0) {
                bail!("field `initial_train_fraction`: {f} is not in (0, 1)");
            }
            walk_forward.initial_train_fraction = f;
        }
        if config.max_train_rows == Some(0) {
            bail!("field `max_train_rows`: must be positive");
        }
        walk_forward.max_train_rows = config.max_train_rows;
        let seed = match config.seed {
            Some(s) => s,
            None => seed_from_env()?.unwrap_or(0),
        };
        Ok(Settings {
            interactions: config.interactions,
            polls: config.polls,
            subjects,
            feature_sets,
            windows,
            models,
            anchors,
            walk_forward,
            seed,
            output_dir: config.output_dir.unwrap_or_else(|| PathBuf::from(".")),
        })
    }

    pub fn interactions_path(&self) -> anyhow::Result<&Path> {
        let p = self.interactions.as_deref().context("field `interactions`: no path given")?;
        if !p.exists() {
            bail!("field `interactions`: {} does not exist", p.display());
        }
        Ok(p)
    }

    pub fn polls_path(&self) -> anyhow::Result<&Path> {
        let p = self.polls.as_deref().context("field `polls`: no path given")?;
        if !p.exists() {
            bail!("field `polls`: {} does not exist", p.display());
        }
        Ok(p)
    }

    pub fn arimax_orders(&self) -> impl Iterator<Item = ArimaxOrder> + '_ {
        self.models.iter().filter_map(|m| match m {
            ModelSpec::Arimax { order, .. } => Some(*order),
            ModelSpec::Regressor(_) => None,
        })
    }
}
