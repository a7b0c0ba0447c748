//! Deterministic synthetic benchmark: interaction tables drawn to match
//! published per-feature summary statistics, and poll series linked to the
//! interaction signal through a configurable latent share.

use std::collections::BTreeMap;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{FeatureKind, IngestError, InteractionKey, InteractionRecord, InteractionTable, Platform, PollBook, SubjectId};
use crate::rng;
use crate::series::{DayIndex, SeriesError, SparseObservations};

pub const MIN_DAYS: usize = 30;
/// Nov 1, 2019 to Jan 1, 2023 inclusive.
pub const BENCHMARK_DAYS: usize = 1158;
pub const BENCHMARK_START: &str = "2019-11-01";
pub const BENCHMARK_CADENCE: usize = 30;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("infeasible target for {key}: {reason}")]
    InfeasibleTarget { key: String, reason: String },
    #[error("need at least {MIN_DAYS} days, got {0}")]
    TooFewDays(usize),
    #[error("subject {0} is not in the interaction table")]
    UnknownSubject(String),
    #[error("invalid link model: {0}")]
    InvalidLink(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureStatTarget {
    pub key: InteractionKey,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

impl FeatureStatTarget {
    pub fn new(platform: Platform, feature: FeatureKind, min: f64, max: f64, mean: f64, std: f64) -> Self {
        let key = InteractionKey::new(platform, feature).expect("catalog pair");
        FeatureStatTarget { key, min, max, mean, std }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |reason: &str| {
            Err(SynthError::InfeasibleTarget {
                key: self.key.label(),
                reason: reason.to_string(),
            })
        };
        if ![self.min, self.max, self.mean, self.std].iter().all(|v| v.is_finite()) {
            return fail("non-finite statistic");
        }
        if self.min < 0.0 || self.min > self.max {
            return fail("need 0 <= min <= max");
        }
        if self.mean < self.min || self.mean > self.max {
            return fail("mean outside [min, max]");
        }
        if self.std < 0.0 {
            return fail("negative std");
        }
        if self.std > 0.0 && (self.mean == self.min || self.mean == self.max) {
            return fail("positive std with mean at a bound");
        }
        Ok(())
    }
}

fn targets(rows: [(Platform, FeatureKind, f64, f64, f64, f64); 11]) -> Vec<FeatureStatTarget> {
    rows.into_iter()
        .map(|(p, f, min, max, mean, std)| FeatureStatTarget::new(p, f, min, max, mean, std))
        .collect()
}

/// Per-day statistics of the main opposition candidate's accounts.
pub fn candidate_a_targets() -> Vec<FeatureStatTarget> {
    use FeatureKind::*;
    use Platform::*;
    targets([
        (Twitter, Post, 1.0, 22.0, 2.18, 1.62),
        (Twitter, Like, 1718.0, 450_026.0, 45_405.50, 53_972.29),
        (Twitter, Retweet, 183.0, 65_902.0, 5_160.18, 6_336.01),
        (Twitter, Reply, 114.0, 29_884.0, 3_377.89, 3_927.55),
        (Facebook, Post, 1.0, 7.0, 1.86, 1.06),
        (Facebook, Like, 1200.0, 167_000.0, 16_372.40, 15_350.86),
        (Facebook, Comment, 46.0, 27_500.0, 2_606.20, 2_880.76),
        (Facebook, Share, 41.0, 12_100.0, 1_876.02, 1_657.93),
        (Instagram, Post, 0.0, 5.0, 1.29, 0.59),
        (Instagram, Like, 0.0, 4_724_120.0, 485_787.72, 426_963.44),
        (Instagram, Share, 2_310.0, 179_820.0, 19_601.68, 20_457.15),
    ])
}

/// Per-day statistics of the incumbent's accounts.
pub fn candidate_b_targets() -> Vec<FeatureStatTarget> {
    use FeatureKind::*;
    use Platform::*;
    targets([
        (Twitter, Post, 1.0, 257.0, 4.3, 7.23),
        (Twitter, Like, 9.0, 3_241_605.0, 61_702.06, 116_693.0),
        (Twitter, Retweet, 16.0, 1_317_198.0, 17_086.71, 40_882.07),
        (Twitter, Reply, 1.0, 110_776.0, 4_248.32, 7_548.85),
        (Facebook, Post, 1.0, 18.0, 3.18, 2.47),
        (Facebook, Like, 3500.0, 689_000.0, 72_004.91, 74_402.03),
        (Facebook, Comment, 46.0, 125_000.0, 6_895.86, 8_897.32),
        (Facebook, Share, 59.0, 89_900.0, 4_633.98, 6_316.15),
        (Instagram, Post, 1.0, 10.0, 1.73, 1.44),
        (Instagram, Like, 29_169.0, 1_969_447.0, 333_650.42, 292_143.55),
        (Instagram, Share, 0.0, 191_601.0, 6_883.42, 11_296.15),
    ])
}

fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn realise(target: &FeatureStatTarget, draws: &[f64], mu: f64, sigma: f64) -> Vec<f64> {
    draws
        .iter()
        .map(|z| (target.min + (mu + sigma * z).exp()).round().clamp(target.min, target.max))
        .collect()
}

/// Integer daily counts from `min + LogNormal(mu, sigma)`, rounded and
/// clipped to `[min, max]`. `(mu, sigma)` are fitted on the actual draws so
/// that rounding and clipping do not bias the empirical mean and spread:
/// for each trial `sigma` a bisection on `mu` matches the mean, and an
/// outer bisection on `sigma` matches the standard deviation.
pub fn sample_feature(target: &FeatureStatTarget, draws: &[f64]) -> Result<Vec<f64>, SynthError> {
    target.validate()?;
    if target.std == 0.0 {
        return Ok(vec![target.mean.round(); draws.len()]);
    }
    let m = target.mean - target.min;
    let s = target.std;
    let analytic = (1.0 + (s / m).powi(2)).ln().sqrt();
    let mu_hi = (target.max - target.min).max(1.0).ln() + 10.0 * analytic.max(1.0);

    let mean_matched = |sigma: f64| {
        let (mut lo, mut hi) = (-40.0, mu_hi);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if moments(&realise(target, draws, mid, sigma)).0 < target.mean {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let values = realise(target, draws, 0.5 * (lo + hi), sigma);
        let (em, es) = moments(&values);
        let score = ((em - target.mean) / target.mean).abs().max(((es - s) / s).abs() / 2.0);
        (values, es, score)
    };

    let (mut lo, mut hi) = (1e-4, (4.0 * analytic).max(4.0));
    let (mut best, _, mut best_score) = mean_matched(analytic);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let (values, es, score) = mean_matched(mid);
        if score < best_score {
            best_score = score;
            best = values;
        }
        if es < s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}

/// One table covering every subject's targets over `days` days from
/// `start`. Keys without a target are all zero.
pub fn gen_interactions(
    subjects: &[(SubjectId, Vec<FeatureStatTarget>)],
    start: DayIndex,
    days: usize,
    seed: u64,
) -> Result<InteractionTable, SynthError> {
    if days < MIN_DAYS {
        return Err(SynthError::TooFewDays(days));
    }
    let jobs: Vec<(&SubjectId, &FeatureStatTarget)> = subjects
        .iter()
        .flat_map(|(s, ts)| ts.iter().map(move |t| (s, t)))
        .collect();
    let columns = jobs
        .par_iter()
        .map(|(subject, target)| {
            let tag = rng::label_tag(&format!("{}/{}", subject, target.key));
            let mut stream = rng::stream(rng::derive_seed(seed, tag), 0);
            let draws: Vec<f64> = (0..days).map(|_| StandardNormal.sample(&mut stream)).collect();
            sample_feature(target, &draws)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut records = Vec::with_capacity(jobs.len() * days);
    for ((subject, target), values) in jobs.iter().zip(columns) {
        for (t, v) in values.into_iter().enumerate() {
            records.push(InteractionRecord {
                date: start.offset(t as i64),
                subject: (*subject).clone(),
                key: target.key,
                value: v as u64,
            });
        }
    }
    Ok(InteractionTable::from_records(&records)?)
}

/// Latent share dynamics for one subject.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkModel {
    pub base_share: f64,
    pub trend_per_day: f64,
    pub seasonal_amplitude: f64,
    pub seasonal_period: f64,
    /// Share points per standard deviation of the 7-day driver average.
    pub interaction_weight: f64,
    pub noise_std: f64,
    pub driver: InteractionKey,
    /// Undecided series level; none is generated when this is zero.
    pub undecided_share: f64,
    pub undecided_noise_std: f64,
}

impl LinkModel {
    /// A pure trend line from `base_share`.
    pub fn line(base_share: f64, trend_per_day: f64) -> Self {
        LinkModel {
            base_share,
            trend_per_day,
            seasonal_amplitude: 0.0,
            seasonal_period: 365.0,
            interaction_weight: 0.0,
            noise_std: 0.0,
            driver: InteractionKey::new(Platform::Twitter, FeatureKind::Like).expect("catalog pair"),
            undecided_share: 0.0,
            undecided_noise_std: 0.0,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidLink(m.to_string()));
        let all = [
            self.base_share,
            self.trend_per_day,
            self.seasonal_amplitude,
            self.seasonal_period,
            self.interaction_weight,
            self.noise_std,
            self.undecided_share,
            self.undecided_noise_std,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("non-finite parameter");
        }
        if self.noise_std < 0.0 || self.undecided_noise_std < 0.0 {
            return bad("noise std must be non-negative");
        }
        if self.seasonal_period <= 0.0 {
            return bad("seasonal period must be positive");
        }
        if !(0.0..=100.0).contains(&self.undecided_share) {
            return bad("undecided share outside [0, 100]");
        }
        Ok(())
    }
}

/// Z-scored trailing 7-day mean of `values` (shorter at the start).
fn driver_signal(values: &[f64]) -> Vec<f64> {
    let rolling: Vec<f64> = (0..values.len())
        .map(|t| {
            let lo = t.saturating_sub(6);
            values[lo..=t].iter().sum::<f64>() / (t + 1 - lo) as f64
        })
        .collect();
    let (mean, sd) = moments(&rolling);
    rolling
        .iter()
        .map(|v| if sd > 0.0 { (v - mean) / sd } else { 0.0 })
        .collect()
}

/// Daily latent share over the table's coverage, clipped to `[0, 100]`.
pub fn latent_share(link: &LinkModel, table: &InteractionTable, subject: &SubjectId, seed: u64) -> Result<Vec<f64>, SynthError> {
    link.validate()?;
    let series = table
        .series(subject, link.driver)
        .ok_or_else(|| SynthError::UnknownSubject(subject.to_string()))?;
    let z = driver_signal(series.values());
    let mut noise = rng::stream(rng::derive_seed(seed, rng::label_tag(&format!("latent/{subject}"))), 0);
    Ok(z.iter()
        .enumerate()
        .map(|(t, zt)| {
            let t = t as f64;
            let eps: f64 = StandardNormal.sample(&mut noise);
            let share = link.base_share
                + link.trend_per_day * t
                + link.seasonal_amplitude * (2.0 * std::f64::consts::PI * t / link.seasonal_period).sin()
                + link.interaction_weight * zt
                + link.noise_std * eps;
            share.clamp(0.0, 100.0)
        })
        .collect())
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Samples the latent share every `cadence` days from the first covered day,
/// rounded to two decimals. When `link.undecided_share > 0` an undecided
/// series is sampled on the same dates, clipped so the day's total stays
/// at most 100.
pub fn gen_polls(
    link: &LinkModel,
    table: &InteractionTable,
    subject: &SubjectId,
    cadence: usize,
    seed: u64,
) -> Result<PollBook, SynthError> {
    if cadence == 0 {
        return Err(SynthError::InvalidLink("poll cadence must be at least 1".into()));
    }
    if !table.contains(subject) {
        return Err(SynthError::UnknownSubject(subject.to_string()));
    }
    let latent = latent_share(link, table, subject, seed)?;
    let start = table.coverage().0;
    let mut noise = rng::stream(rng::derive_seed(seed, rng::label_tag(&format!("undecided/{subject}"))), 0);
    let mut shares = Vec::new();
    let mut undecided = Vec::new();
    for t in (0..latent.len()).step_by(cadence) {
        let day = start.offset(t as i64);
        let share = round2(latent[t]);
        shares.push((day, share));
        if link.undecided_share > 0.0 {
            let eps: f64 = StandardNormal.sample(&mut noise);
            let u = (link.undecided_share + link.undecided_noise_std * eps).clamp(0.0, 100.0 - share);
            undecided.push((day, round2(u).min(round2(100.0 - share))));
        }
    }
    let undecided = if undecided.is_empty() {
        None
    } else {
        Some(SparseObservations::new(undecided)?)
    };
    let mut subjects = BTreeMap::new();
    subjects.insert(subject.clone(), SparseObservations::new(shares)?);
    Ok(PollBook::new(subjects, undecided)?)
}

/// Interactions and polls for the two benchmark candidates.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub interactions: InteractionTable,
    pub polls: PollBook,
}

/// Link models used by [`benchmark`]: slow trends with mild yearly
/// seasonality and a small interaction effect.
pub fn benchmark_links() -> Vec<(SubjectId, LinkModel)> {
    let a = SubjectId::new("candidate_a").expect("valid id");
    let b = SubjectId::new("candidate_b").expect("valid id");
    let mut link_a = LinkModel::line(38.0, 0.005);
    link_a.seasonal_amplitude = 0.4;
    link_a.interaction_weight = 0.02;
    link_a.noise_std = 0.02;
    link_a.undecided_share = 8.0;
    link_a.undecided_noise_std = 0.5;
    let mut link_b = LinkModel::line(47.0, -0.003);
    link_b.seasonal_amplitude = 0.3;
    link_b.interaction_weight = 0.02;
    link_b.noise_std = 0.02;
    vec![(a, link_a), (b, link_b)]
}

pub fn benchmark_targets() -> Vec<(SubjectId, Vec<FeatureStatTarget>)> {
    let ids: Vec<SubjectId> = benchmark_links().into_iter().map(|(s, _)| s).collect();
    vec![
        (ids[0].clone(), candidate_a_targets()),
        (ids[1].clone(), candidate_b_targets()),
    ]
}

/// The standard benchmark: 1158 days from 2019-11-01, monthly polls.
pub fn benchmark(seed: u64) -> Result<Benchmark, SynthError> {
    let start: DayIndex = BENCHMARK_START.parse().expect("valid date");
    let interactions = gen_interactions(&benchmark_targets(), start, BENCHMARK_DAYS, seed)?;
    let mut polls: Option<PollBook> = None;
    for (subject, link) in benchmark_links() {
        let book = gen_polls(&link, &interactions, &subject, BENCHMARK_CADENCE, seed)?;
        polls = Some(match polls {
            None => book,
            Some(p) => p.merge(book)?,
        });
    }
    Ok(Benchmark {
        interactions,
        polls: polls.expect("two subjects"),
    })
}
