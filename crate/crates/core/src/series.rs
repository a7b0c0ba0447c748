//! Calendar-aligned daily series arithmetic.
//!
//! Everything here works on dense, gap-free daily series: linear poll
//! interpolation, trailing-window sums and classical additive seasonal
//! decomposition.

use std::fmt;
use std::str::FromStr;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("series must contain at least one value")]
    Empty,
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("percent value {value} at position {index} is outside [0, 100]")]
    PercentOutOfRange { index: usize, value: f64 },
    #[error("interpolation needs at least two observations, got {0}")]
    FewerThanTwoPoints(usize),
    #[error("observation dates must be strictly increasing (at {0})")]
    NonMonotoneDates(DayIndex),
    #[error("window must be at least one day")]
    ZeroWindow,
    #[error("window of {window} days exceeds series length {len}")]
    WindowLargerThanSeries { window: usize, len: usize },
    #[error("period must be at least one day")]
    ZeroPeriod,
    #[error("decomposition with period {period} needs at least {needed} values, got {len}")]
    SeriesTooShort { period: usize, needed: usize, len: usize },
    #[error("invalid date {0:?}; expected YYYY-MM-DD")]
    InvalidDate(String),
}

fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch")
}

/// Whole days since 1970-01-01.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DayIndex(pub i64);

impl DayIndex {
    pub fn from_date(date: NaiveDate) -> Self {
        DayIndex((date - epoch()).num_days())
    }

    pub fn to_date(self) -> NaiveDate {
        epoch() + Duration::days(self.0)
    }

    pub fn ordinal(self) -> i64 {
        self.0
    }

    pub fn offset(self, days: i64) -> Self {
        DayIndex(self.0 + days)
    }

    /// Signed number of days from `earlier` to `self`.
    pub fn days_since(self, earlier: DayIndex) -> i64 {
        self.0 - earlier.0
    }
}

impl fmt::Display for DayIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_date().format("%Y-%m-%d"))
    }
}

impl FromStr for DayIndex {
    type Err = SeriesError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        // chrono accepts unpadded fields; the file formats require the strict form
        let strict = trimmed.len() == 10
            && trimmed.as_bytes()[4] == b'-'
            && trimmed.as_bytes()[7] == b'-';
        if !strict {
            return Err(SeriesError::InvalidDate(s.to_string()));
        }
        NaiveDate::parse_from_str(trimmed, "%Y-%m-%d")
            .map(DayIndex::from_date)
            .map_err(|_| SeriesError::InvalidDate(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Count,
    Percent,
}

/// A dense run of daily values starting at `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries {
    start: DayIndex,
    values: Vec<f64>,
    unit: Unit,
}

impl DailySeries {
    pub fn new(start: DayIndex, values: Vec<f64>, unit: Unit) -> Result<Self, SeriesError> {
        if values.is_empty() {
            return Err(SeriesError::Empty);
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(SeriesError::NonFinite(index));
            }
            if unit == Unit::Percent && !(0.0..=100.0).contains(&value) {
                return Err(SeriesError::PercentOutOfRange { index, value });
            }
        }
        Ok(Self { start, values, unit })
    }

    pub fn start(&self) -> DayIndex {
        self.start
    }

    /// Last covered day (inclusive).
    pub fn end(&self) -> DayIndex {
        self.start.offset(self.values.len() as i64 - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn day_at(&self, position: usize) -> DayIndex {
        self.start.offset(position as i64)
    }

    pub fn get(&self, day: DayIndex) -> Option<f64> {
        let offset = day.days_since(self.start);
        if offset < 0 {
            return None;
        }
        self.values.get(offset as usize).copied()
    }

    /// Sub-series covering `[from, to]`, clamped to the covered range.
    pub fn slice(&self, from: DayIndex, to: DayIndex) -> Option<DailySeries> {
        let from = from.max(self.start);
        let to = to.min(self.end());
        if from > to {
            return None;
        }
        let lo = from.days_since(self.start) as usize;
        let hi = to.days_since(self.start) as usize;
        Some(DailySeries {
            start: from,
            values: self.values[lo..=hi].to_vec(),
            unit: self.unit,
        })
    }
}

/// Dated percent observations, strictly increasing in date.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseObservations {
    points: Vec<(DayIndex, f64)>,
}

impl SparseObservations {
    pub fn new(points: Vec<(DayIndex, f64)>) -> Result<Self, SeriesError> {
        for (index, &(day, value)) in points.iter().enumerate() {
            if !value.is_finite() {
                return Err(SeriesError::NonFinite(index));
            }
            if !(0.0..=100.0).contains(&value) {
                return Err(SeriesError::PercentOutOfRange { index, value });
            }
            if index > 0 && points[index - 1].0 >= day {
                return Err(SeriesError::NonMonotoneDates(day));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(DayIndex, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first_day(&self) -> Option<DayIndex> {
        self.points.first().map(|p| p.0)
    }

    pub fn last_day(&self) -> Option<DayIndex> {
        self.points.last().map(|p| p.0)
    }

    pub fn value_on(&self, day: DayIndex) -> Option<f64> {
        self.points
            .binary_search_by_key(&day, |p| p.0)
            .ok()
            .map(|i| self.points[i].1)
    }

    /// Linearly interpolated value at `day`; days past the last observation
    /// hold the last value. Returns `None` before the first observation.
    pub fn interpolate_at(&self, day: DayIndex) -> Option<f64> {
        let first = self.points.first()?;
        if day < first.0 {
            return None;
        }
        let last = self.points.last()?;
        if day >= last.0 {
            return Some(last.1);
        }
        // index of the first knot strictly after `day`
        let hi = self.points.partition_point(|p| p.0 <= day);
        let (d0, v0) = self.points[hi - 1];
        let (d1, v1) = self.points[hi];
        if d0 == day {
            return Some(v0);
        }
        let span = d1.days_since(d0) as f64;
        let t = day.days_since(d0) as f64;
        Some(v0 + (v1 - v0) * (t / span))
    }
}

/// Linear interpolation of the observations to one value per day over
/// `[first date, last date]`.
pub fn interpolate_daily(obs: &SparseObservations) -> Result<DailySeries, SeriesError> {
    if obs.len() < 2 {
        return Err(SeriesError::FewerThanTwoPoints(obs.len()));
    }
    let points = obs.points();
    let start = points[0].0;
    let mut values = Vec::with_capacity(points[points.len() - 1].0.days_since(start) as usize + 1);
    for pair in points.windows(2) {
        let (d0, v0) = pair[0];
        let (d1, v1) = pair[1];
        if d1 <= d0 {
            return Err(SeriesError::NonMonotoneDates(d1));
        }
        let span = d1.days_since(d0);
        for step in 0..span {
            values.push(v0 + (v1 - v0) * (step as f64 / span as f64));
        }
    }
    values.push(points[points.len() - 1].1);
    DailySeries::new(start, values, Unit::Percent)
}

/// Where window sums are anchored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchors {
    /// Disjoint windows; one anchor every `w` days.
    #[default]
    Tumbling,
    /// One anchor per day once a full window is available.
    Rolling,
}

impl FromStr for Anchors {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tumbling" => Ok(Anchors::Tumbling),
            "rolling" => Ok(Anchors::Rolling),
            other => Err(format!("unknown anchor mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSum {
    pub anchor: DayIndex,
    pub sum: f64,
}

/// Trailing sums over the `window` days ending at (and including) each anchor.
pub fn aggregate_window(
    series: &DailySeries,
    window: usize,
    anchors: Anchors,
) -> Result<Vec<WindowSum>, SeriesError> {
    if window == 0 {
        return Err(SeriesError::ZeroWindow);
    }
    let values = series.values();
    if window > values.len() {
        return Err(SeriesError::WindowLargerThanSeries {
            window,
            len: values.len(),
        });
    }
    let step = match anchors {
        Anchors::Tumbling => window,
        Anchors::Rolling => 1,
    };
    // each sum is taken directly over its slice so tumbling and rolling
    // agree bit-for-bit at shared anchors
    Ok((window - 1..values.len())
        .step_by(step)
        .map(|end| WindowSum {
            anchor: series.day_at(end),
            sum: values[end + 1 - window..=end].iter().sum(),
        })
        .collect())
}

/// Classical additive decomposition. Trend values are absent where the
/// centred moving average does not reach.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub start: DayIndex,
    pub period: usize,
    pub observed: Vec<f64>,
    pub trend: Vec<Option<f64>>,
    pub seasonal: Vec<f64>,
    pub residual: Vec<Option<f64>>,
}

impl Decomposition {
    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }

    /// One full cycle of seasonal indices, starting at the series start.
    pub fn seasonal_cycle(&self) -> &[f64] {
        &self.seasonal[..self.period]
    }
}

pub fn decompose(series: &DailySeries, period: usize) -> Result<Decomposition, SeriesError> {
    if period == 0 {
        return Err(SeriesError::ZeroPeriod);
    }
    let y = series.values();
    let n = y.len();
    let needed = 2 * period;
    if n < needed {
        return Err(SeriesError::SeriesTooShort {
            period,
            needed,
            len: n,
        });
    }

    let half = period / 2;
    let mut trend = vec![None; n];
    for (t, slot) in trend.iter_mut().enumerate().take(n - half).skip(half) {
        let value = if period % 2 == 1 {
            y[t - half..=t + half].iter().sum::<f64>() / period as f64
        } else {
            // 2 x period moving average: half weight on both ends
            let inner: f64 = y[t + 1 - half..t + half].iter().sum();
            (0.5 * y[t - half] + inner + 0.5 * y[t + half]) / period as f64
        };
        *slot = Some(value);
    }

    let mut sums = vec![0.0; period];
    let mut counts = vec![0usize; period];
    for t in 0..n {
        if let Some(tr) = trend[t] {
            sums[t % period] += y[t] - tr;
            counts[t % period] += 1;
        }
    }
    let mut indices: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    let centre = indices.iter().sum::<f64>() / period as f64;
    for v in &mut indices {
        *v -= centre;
    }

    let seasonal: Vec<f64> = (0..n).map(|t| indices[t % period]).collect();
    let residual = (0..n)
        .map(|t| trend[t].map(|tr| y[t] - tr - seasonal[t]))
        .collect();

    Ok(Decomposition {
        start: series.start(),
        period,
        observed: y.to_vec(),
        trend,
        seasonal,
        residual,
    })
}
