//! Vote-share forecasting from daily social-media interaction volumes and
//! sparse poll observations.
//!
//! The pipeline: interpolate polls to a daily share, sum interactions over
//! trailing windows, fit one of four model families per subject, score them
//! with a walk-forward harness that refits after every step, then turn the
//! predicted shares into round-two outcomes under vote-transfer scenarios.

pub mod arimax;
pub mod evaluate;
pub mod ingest;
pub mod optim;
pub mod regressors;
pub mod rng;
pub mod scenario;
pub mod series;
pub mod synth;
