//! Interaction and poll file ingestion, summary statistics and per-subject
//! model dataset assembly.
//!
//! File formats:
//!
//! * `interactions.csv`: `date,candidate,platform,feature,value`
//! * `polls.csv`: `date,subject,share_pct`, with `__undecided__` as the
//!   reserved subject for the undecided share.
//!
//! Instagram's "Share (comment)" column is stored under [`FeatureKind::Share`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::{
    aggregate_window, Anchors, DailySeries, DayIndex, SeriesError, SparseObservations, Unit,
};

/// Subject literal reserved for the undecided share in poll files.
pub const UNDECIDED: &str = "__undecided__";

/// Published poll shares are rounded, so per-date totals may exceed 100 by this much.
pub const POLL_SUM_TOLERANCE: f64 = 0.5;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: malformed row: {message}")]
    MalformedRow { line: u64, message: String },
    #[error("line {line}: {platform} has no {feature} feature")]
    InvalidPlatformFeaturePair {
        line: u64,
        platform: Platform,
        feature: FeatureKind,
    },
    #[error("line {line}: negative count {value}")]
    NegativeCount { line: u64, value: i64 },
    #[error("line {line}: duplicate cell {date} {subject} {platform}.{feature}")]
    DuplicateCell {
        line: u64,
        date: DayIndex,
        subject: String,
        platform: Platform,
        feature: FeatureKind,
    },
    #[error("line {line}: share {value} is outside [0, 100]")]
    ShareOutOfRange { line: u64, value: f64 },
    #[error("line {line}: dates for {subject} are not strictly increasing")]
    NonMonotoneDates { line: u64, subject: String },
    #[error("poll shares on {date} sum to {total:.2}, above 100 + {POLL_SUM_TOLERANCE}")]
    SumExceeds100 { date: DayIndex, total: f64 },
    #[error("unknown subject {0:?}")]
    UnknownSubject(String),
    #[error("invalid subject name {0:?}")]
    InvalidSubject(String),
    #[error("subject {subject}: usable overlap of {overlap} days is shorter than window {window}")]
    InsufficientOverlap {
        subject: String,
        overlap: i64,
        window: usize,
    },
    #[error("dataset invariant violated: {0}")]
    InvalidDataset(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IngestError {
    fn malformed(line: u64, message: impl Into<String>) -> Self {
        IngestError::MalformedRow {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Platform {
    Twitter,
    Facebook,
    Instagram,
}

impl Platform {
    pub const ALL: [Platform; 3] = [Platform::Twitter, Platform::Facebook, Platform::Instagram];

    pub fn as_str(self) -> &'static str {
        match self {
            Platform::Twitter => "twitter",
            Platform::Facebook => "facebook",
            Platform::Instagram => "instagram",
        }
    }

    /// Features recorded for this platform, in catalog order.
    pub fn features(self) -> &'static [FeatureKind] {
        use FeatureKind::*;
        match self {
            Platform::Twitter => &[Post, Like, Retweet, Reply],
            Platform::Facebook => &[Post, Like, Comment, Share],
            Platform::Instagram => &[Post, Like, Share],
        }
    }

    pub fn supports(self, feature: FeatureKind) -> bool {
        self.features().contains(&feature)
    }
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Platform {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "twitter" => Ok(Platform::Twitter),
            "facebook" => Ok(Platform::Facebook),
            "instagram" => Ok(Platform::Instagram),
            other => Err(format!("unknown platform {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Post,
    Like,
    Retweet,
    Reply,
    Comment,
    Share,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Post => "post",
            FeatureKind::Like => "like",
            FeatureKind::Retweet => "retweet",
            FeatureKind::Reply => "reply",
            FeatureKind::Comment => "comment",
            FeatureKind::Share => "share",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "post" => Ok(FeatureKind::Post),
            "like" => Ok(FeatureKind::Like),
            "retweet" => Ok(FeatureKind::Retweet),
            "reply" => Ok(FeatureKind::Reply),
            "comment" => Ok(FeatureKind::Comment),
            "share" => Ok(FeatureKind::Share),
            other => Err(format!("unknown feature {other:?}")),
        }
    }
}

/// A valid (platform, feature) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InteractionKey {
    pub platform: Platform,
    pub feature: FeatureKind,
}

impl InteractionKey {
    pub fn new(platform: Platform, feature: FeatureKind) -> Option<Self> {
        platform
            .supports(feature)
            .then_some(InteractionKey { platform, feature })
    }

    /// All eleven keys in catalog order.
    pub fn catalog() -> Vec<InteractionKey> {
        Platform::ALL
            .iter()
            .flat_map(|&platform| {
                platform
                    .features()
                    .iter()
                    .map(move |&feature| InteractionKey { platform, feature })
            })
            .collect()
    }

    pub fn label(self) -> String {
        format!("{}.{}", self.platform, self.feature)
    }
}

impl fmt::Display for InteractionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.platform, self.feature)
    }
}

/// Candidate or party key: trimmed, inner whitespace collapsed, lowercase.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SubjectId(String);

impl SubjectId {
    pub fn new(name: &str) -> Result<Self, IngestError> {
        let normalized = name
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
            .to_lowercase();
        if normalized.is_empty() || normalized == UNDECIDED {
            return Err(IngestError::InvalidSubject(name.to_string()));
        }
        Ok(SubjectId(normalized))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for SubjectId {
    type Error = IngestError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        SubjectId::new(&value)
    }
}

impl From<SubjectId> for String {
    fn from(value: SubjectId) -> Self {
        value.0
    }
}

impl fmt::Display for SubjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for SubjectId {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SubjectId::new(s)
    }
}

/// One daily cell before densification.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionRecord {
    pub date: DayIndex,
    pub subject: SubjectId,
    pub key: InteractionKey,
    pub value: u64,
}

/// Dense daily interaction counts for every subject and every catalog key.
///
/// Keys missing from the input are present as all-zero series.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionTable {
    start: DayIndex,
    end: DayIndex,
    series: BTreeMap<SubjectId, BTreeMap<InteractionKey, DailySeries>>,
}

impl InteractionTable {
    /// Densifies records over their union date range. Duplicate cells are
    /// rejected; `line_of` maps record positions to source line numbers for
    /// error reporting.
    pub fn from_records(records: &[InteractionRecord]) -> Result<Self, IngestError> {
        Self::from_records_with_lines(records, |i| i as u64 + 1)
    }

    fn from_records_with_lines(
        records: &[InteractionRecord],
        line_of: impl Fn(usize) -> u64,
    ) -> Result<Self, IngestError> {
        let (Some(start), Some(end)) = (
            records.iter().map(|r| r.date).min(),
            records.iter().map(|r| r.date).max(),
        ) else {
            return Err(IngestError::malformed(0, "no interaction rows"));
        };
        let len = end.days_since(start) as usize + 1;
        let subjects: BTreeSet<&SubjectId> = records.iter().map(|r| &r.subject).collect();
        let mut dense: BTreeMap<SubjectId, BTreeMap<InteractionKey, Vec<f64>>> = subjects
            .into_iter()
            .map(|s| {
                let keys = InteractionKey::catalog()
                    .into_iter()
                    .map(|k| (k, vec![0.0; len]))
                    .collect();
                (s.clone(), keys)
            })
            .collect();
        let mut seen = BTreeSet::new();
        for (i, r) in records.iter().enumerate() {
            if !seen.insert((r.date, &r.subject, r.key)) {
                return Err(IngestError::DuplicateCell {
                    line: line_of(i),
                    date: r.date,
                    subject: r.subject.to_string(),
                    platform: r.key.platform,
                    feature: r.key.feature,
                });
            }
            let slot = dense
                .get_mut(&r.subject)
                .and_then(|keys| keys.get_mut(&r.key))
                .expect("densified key");
            slot[r.date.days_since(start) as usize] = r.value as f64;
        }
        let series = dense
            .into_iter()
            .map(|(subject, keys)| {
                let keys = keys
                    .into_iter()
                    .map(|(k, v)| {
                        let s = DailySeries::new(start, v, Unit::Count).expect("finite counts");
                        (k, s)
                    })
                    .collect();
                (subject, keys)
            })
            .collect();
        Ok(Self { start, end, series })
    }

    pub fn coverage(&self) -> (DayIndex, DayIndex) {
        (self.start, self.end)
    }

    pub fn days(&self) -> usize {
        self.end.days_since(self.start) as usize + 1
    }

    pub fn subjects(&self) -> impl Iterator<Item = &SubjectId> {
        self.series.keys()
    }

    pub fn contains(&self, subject: &SubjectId) -> bool {
        self.series.contains_key(subject)
    }

    pub fn series(&self, subject: &SubjectId, key: InteractionKey) -> Option<&DailySeries> {
        self.series.get(subject).and_then(|keys| keys.get(&key))
    }

    fn subject_series(
        &self,
        subject: &SubjectId,
    ) -> Result<&BTreeMap<InteractionKey, DailySeries>, IngestError> {
        self.series
            .get(subject)
            .ok_or_else(|| IngestError::UnknownSubject(subject.to_string()))
    }

    /// Writes every dense cell, sorted by date, subject and catalog key.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), IngestError> {
        let mut out = std::io::BufWriter::new(writer);
        writeln!(out, "date,candidate,platform,feature,value")?;
        let catalog = InteractionKey::catalog();
        for offset in 0..self.days() {
            let day = self.start.offset(offset as i64);
            for (subject, keys) in &self.series {
                for key in &catalog {
                    let value = keys[key].values()[offset];
                    writeln!(
                        out,
                        "{day},{subject},{},{},{}",
                        key.platform, key.feature, value as u64
                    )?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn record_line(record: &csv::StringRecord, fallback: u64) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(fallback)
}

fn check_header(reader: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<(), IngestError> {
    let header = reader
        .headers()
        .map_err(|e| IngestError::malformed(1, e.to_string()))?;
    if header.is_empty() || (header.len() == 1 && header[0].trim().is_empty()) {
        return Err(IngestError::malformed(1, "missing header"));
    }
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != expected {
        return Err(IngestError::malformed(
            1,
            format!("expected header {:?}, got {:?}", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader)
}

fn field<'r>(record: &'r csv::StringRecord, index: usize, line: u64) -> Result<&'r str, IngestError> {
    record
        .get(index)
        .map(str::trim)
        .ok_or_else(|| IngestError::malformed(line, format!("missing column {}", index + 1)))
}

pub fn read_interactions<R: Read>(reader: R) -> Result<InteractionTable, IngestError> {
    let mut rdr = csv_reader(reader);
    check_header(&mut rdr, &["date", "candidate", "platform", "feature", "value"])?;
    let mut records = Vec::new();
    let mut lines = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| IngestError::malformed(i as u64 + 2, e.to_string()))?;
        let line = record_line(&row, i as u64 + 2);
        if row.len() != 5 {
            return Err(IngestError::malformed(
                line,
                format!("expected 5 columns, got {}", row.len()),
            ));
        }
        let date: DayIndex = field(&row, 0, line)?
            .parse()
            .map_err(|e: SeriesError| IngestError::malformed(line, e.to_string()))?;
        let subject = SubjectId::new(field(&row, 1, line)?)
            .map_err(|e| IngestError::malformed(line, e.to_string()))?;
        let platform: Platform = field(&row, 2, line)?
            .parse()
            .map_err(|e: String| IngestError::malformed(line, e))?;
        let feature: FeatureKind = field(&row, 3, line)?
            .parse()
            .map_err(|e: String| IngestError::malformed(line, e))?;
        let key = InteractionKey::new(platform, feature).ok_or(
            IngestError::InvalidPlatformFeaturePair {
                line,
                platform,
                feature,
            },
        )?;
        let raw = field(&row, 4, line)?;
        let value: i64 = raw
            .parse()
            .map_err(|_| IngestError::malformed(line, format!("value {raw:?} is not an integer")))?;
        if value < 0 {
            return Err(IngestError::NegativeCount { line, value });
        }
        records.push(InteractionRecord {
            date,
            subject,
            key,
            value: value as u64,
        });
        lines.push(line);
    }
    if records.is_empty() {
        return Err(IngestError::malformed(2, "no data rows"));
    }
    InteractionTable::from_records_with_lines(&records, |i| lines[i])
}

pub fn parse_interactions(path: impl AsRef<Path>) -> Result<InteractionTable, IngestError> {
    read_interactions(std::fs::File::open(path)?)
}

/// Poll observations per subject plus the optional undecided series.
#[derive(Debug, Clone, PartialEq)]
pub struct PollBook {
    subjects: BTreeMap<SubjectId, SparseObservations>,
    undecided: Option<SparseObservations>,
}

impl PollBook {
    pub fn new(
        subjects: BTreeMap<SubjectId, SparseObservations>,
        undecided: Option<SparseObservations>,
    ) -> Result<Self, IngestError> {
        let mut totals: BTreeMap<DayIndex, f64> = BTreeMap::new();
        for obs in subjects.values().chain(undecided.iter()) {
            for &(day, value) in obs.points() {
                *totals.entry(day).or_default() += value;
            }
        }
        for (date, total) in totals {
            // small slack absorbs float error in the tolerance comparison
            if total > 100.0 + POLL_SUM_TOLERANCE + 1e-9 {
                return Err(IngestError::SumExceeds100 { date, total });
            }
        }
        Ok(Self {
            subjects,
            undecided,
        })
    }

    pub fn subjects(&self) -> impl Iterator<Item = &SubjectId> {
        self.subjects.keys()
    }

    pub fn get(&self, subject: &SubjectId) -> Option<&SparseObservations> {
        self.subjects.get(subject)
    }

    pub fn undecided(&self) -> Option<&SparseObservations> {
        self.undecided.as_ref()
    }

    /// Union of two books; `other`'s undecided series is used only when
    /// `self` has none.
    pub fn merge(self, other: PollBook) -> Result<PollBook, IngestError> {
        let mut subjects = self.subjects;
        for (k, v) in other.subjects {
            if subjects.contains_key(&k) {
                return Err(IngestError::InvalidSubject(format!("{k} appears in both books")));
            }
            subjects.insert(k, v);
        }
        PollBook::new(subjects, self.undecided.or(other.undecided))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), IngestError> {
        let mut rows: Vec<(DayIndex, String, f64)> = Vec::new();
        for (subject, obs) in &self.subjects {
            rows.extend(obs.points().iter().map(|&(d, v)| (d, subject.to_string(), v)));
        }
        if let Some(obs) = &self.undecided {
            rows.extend(obs.points().iter().map(|&(d, v)| (d, UNDECIDED.to_string(), v)));
        }
        rows.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        let mut out = std::io::BufWriter::new(writer);
        writeln!(out, "date,subject,share_pct")?;
        for (day, subject, value) in rows {
            writeln!(out, "{day},{subject},{value:.2}")?;
        }
        out.flush()?;
        Ok(())
    }
}

fn parse_share(raw: &str, line: u64) -> Result<f64, IngestError> {
    let malformed = || IngestError::malformed(line, format!("share {raw:?} is not a decimal with at most 2 fraction digits"));
    let digits_ok = raw
        .trim_start_matches('-')
        .split_once('.')
        .map_or(true, |(_, frac)| frac.len() <= 2);
    if !digits_ok {
        return Err(malformed());
    }
    let value: f64 = raw.parse().map_err(|_| malformed())?;
    if !value.is_finite() {
        return Err(malformed());
    }
    if !(0.0..=100.0).contains(&value) {
        return Err(IngestError::ShareOutOfRange { line, value });
    }
    Ok(value)
}

pub fn read_polls<R: Read>(reader: R) -> Result<PollBook, IngestError> {
    let mut rdr = csv_reader(reader);
    check_header(&mut rdr, &["date", "subject", "share_pct"])?;
    let mut by_subject: BTreeMap<String, Vec<(DayIndex, f64)>> = BTreeMap::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| IngestError::malformed(i as u64 + 2, e.to_string()))?;
        let line = record_line(&row, i as u64 + 2);
        if row.len() != 3 {
            return Err(IngestError::malformed(
                line,
                format!("expected 3 columns, got {}", row.len()),
            ));
        }
        let date: DayIndex = field(&row, 0, line)?
            .parse()
            .map_err(|e: SeriesError| IngestError::malformed(line, e.to_string()))?;
        let raw_subject = field(&row, 1, line)?;
        let subject = if raw_subject == UNDECIDED {
            UNDECIDED.to_string()
        } else {
            SubjectId::new(raw_subject)
                .map_err(|e| IngestError::malformed(line, e.to_string()))?
                .0
        };
        let value = parse_share(field(&row, 2, line)?, line)?;
        let points = by_subject.entry(subject.clone()).or_default();
        if points.last().is_some_and(|&(last, _)| last >= date) {
            return Err(IngestError::NonMonotoneDates { line, subject });
        }
        points.push((date, value));
    }
    let mut undecided = None;
    let mut subjects = BTreeMap::new();
    for (name, points) in by_subject {
        let obs = SparseObservations::new(points)?;
        if name == UNDECIDED {
            undecided = Some(obs);
        } else {
            subjects.insert(SubjectId(name), obs);
        }
    }
    if subjects.is_empty() {
        return Err(IngestError::malformed(2, "no subject rows"));
    }
    PollBook::new(subjects, undecided)
}

pub fn parse_polls(path: impl AsRef<Path>) -> Result<PollBook, IngestError> {
    read_polls(std::fs::File::open(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureSummary {
    pub key: InteractionKey,
    /// Number of active days the statistics cover.
    pub days: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std_dev: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryStats {
    pub subject: SubjectId,
    pub features: Vec<FeatureSummary>,
}

impl SummaryStats {
    pub fn get(&self, key: InteractionKey) -> Option<&FeatureSummary> {
        self.features.iter().find(|f| f.key == key)
    }
}

/// Per-feature statistics over the days on which the platform had at least
/// one post. Platforms with no active day are omitted.
pub fn describe(table: &InteractionTable, subject: &SubjectId) -> Result<SummaryStats, IngestError> {
    let keys = table.subject_series(subject)?;
    let mut features = Vec::new();
    for platform in Platform::ALL {
        let posts = keys[&InteractionKey {
            platform,
            feature: FeatureKind::Post,
        }]
            .values();
        let active: Vec<usize> = (0..posts.len()).filter(|&i| posts[i] > 0.0).collect();
        if active.is_empty() {
            continue;
        }
        for &feature in platform.features() {
            let key = InteractionKey { platform, feature };
            let values = keys[&key].values();
            let picked = active.iter().map(|&i| values[i]);
            let n = active.len() as f64;
            let (min, max, sum) = picked.fold(
                (f64::INFINITY, f64::NEG_INFINITY, 0.0),
                |(lo, hi, s), v| (lo.min(v), hi.max(v), s + v),
            );
            let mean = sum / n;
            let var = active
                .iter()
                .map(|&i| (values[i] - mean).powi(2))
                .sum::<f64>()
                / n;
            features.push(FeatureSummary {
                key,
                days: active.len(),
                min,
                max,
                mean: mean.clamp(min, max),
                std_dev: var.sqrt(),
            });
        }
    }
    Ok(SummaryStats {
        subject: subject.clone(),
        features,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    TwitterOnly,
    FacebookOnly,
    InstagramOnly,
    All,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 4] = [
        FeatureSet::TwitterOnly,
        FeatureSet::FacebookOnly,
        FeatureSet::InstagramOnly,
        FeatureSet::All,
    ];

    pub fn platforms(self) -> &'static [Platform] {
        match self {
            FeatureSet::TwitterOnly => &[Platform::Twitter],
            FeatureSet::FacebookOnly => &[Platform::Facebook],
            FeatureSet::InstagramOnly => &[Platform::Instagram],
            FeatureSet::All => &Platform::ALL,
        }
    }

    pub fn keys(self) -> Vec<InteractionKey> {
        self.platforms()
            .iter()
            .flat_map(|&platform| {
                platform
                    .features()
                    .iter()
                    .map(move |&feature| InteractionKey { platform, feature })
            })
            .collect()
    }

    pub fn label(self) -> &'static str {
        match self {
            FeatureSet::TwitterOnly => "twitter",
            FeatureSet::FacebookOnly => "facebook",
            FeatureSet::InstagramOnly => "instagram",
            FeatureSet::All => "all",
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for FeatureSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "twitter" | "twitter_only" => Ok(FeatureSet::TwitterOnly),
            "facebook" | "facebook_only" => Ok(FeatureSet::FacebookOnly),
            "instagram" | "instagram_only" => Ok(FeatureSet::InstagramOnly),
            "all" => Ok(FeatureSet::All),
            other => Err(format!("unknown feature set {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    pub anchor: DayIndex,
    pub features: Vec<f64>,
    pub target: f64,
    /// Target held flat past the last poll.
    pub extrapolated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelDataset {
    subject: SubjectId,
    feature_set: FeatureSet,
    window: usize,
    feature_names: Vec<String>,
    rows: Vec<DatasetRow>,
}

impl ModelDataset {
    pub fn new(
        subject: SubjectId,
        feature_set: FeatureSet,
        window: usize,
        feature_names: Vec<String>,
        rows: Vec<DatasetRow>,
    ) -> Result<Self, IngestError> {
        if window == 0 {
            return Err(IngestError::InvalidDataset("window must be positive".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.features.len() != feature_names.len() {
                return Err(IngestError::InvalidDataset(format!(
                    "row {i} has {} features, expected {}",
                    row.features.len(),
                    feature_names.len()
                )));
            }
            if i > 0 && rows[i - 1].anchor >= row.anchor {
                return Err(IngestError::InvalidDataset(format!(
                    "row {i} anchor {} is not after {}",
                    row.anchor,
                    rows[i - 1].anchor
                )));
            }
            if !(0.0..=100.0).contains(&row.target) {
                return Err(IngestError::InvalidDataset(format!(
                    "row {i} target {} outside [0, 100]",
                    row.target
                )));
            }
            if row.features.iter().any(|v| !v.is_finite()) {
                return Err(IngestError::InvalidDataset(format!("row {i} has non-finite features")));
            }
        }
        Ok(Self {
            subject,
            feature_set,
            window,
            feature_names,
            rows,
        })
    }

    pub fn subject(&self) -> &SubjectId {
        &self.subject
    }

    pub fn feature_set(&self) -> FeatureSet {
        self.feature_set
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn rows(&self) -> &[DatasetRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.target).collect()
    }

    /// CSV with header `anchor,<feature names...>,target,extrapolated`.
    /// Floats use shortest round-trip formatting.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), IngestError> {
        let mut out = std::io::BufWriter::new(writer);
        writeln!(out, "# subject={} feature_set={} window={}", self.subject, self.feature_set, self.window)?;
        write!(out, "anchor")?;
        for name in &self.feature_names {
            write!(out, ",{name}")?;
        }
        writeln!(out, ",target,extrapolated")?;
        for row in &self.rows {
            write!(out, "{}", row.anchor)?;
            for v in &row.features {
                write!(out, ",{v:?}")?;
            }
            writeln!(out, ",{:?},{}", row.target, u8::from(row.extrapolated))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, IngestError> {
        let mut text = String::new();
        let mut reader = reader;
        reader.read_to_string(&mut text)?;
        let mut lines = text.lines();
        let meta = lines
            .next()
            .and_then(|l| l.strip_prefix("# "))
            .ok_or_else(|| IngestError::malformed(1, "missing dataset metadata line"))?;
        let mut subject = None;
        let mut feature_set = None;
        let mut window = None;
        for part in meta.split_whitespace() {
            match part.split_once('=') {
                Some(("subject", v)) => subject = Some(SubjectId(v.to_string())),
                Some(("feature_set", v)) => {
                    feature_set = Some(v.parse().map_err(|e: String| IngestError::malformed(1, e))?)
                }
                Some(("window", v)) => {
                    window = Some(v.parse().map_err(|_| IngestError::malformed(1, "bad window"))?)
                }
                _ => {}
            }
        }
        let (Some(subject), Some(feature_set), Some(window)) = (subject, feature_set, window) else {
            return Err(IngestError::malformed(1, "incomplete metadata"));
        };
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| IngestError::malformed(2, "missing header"))?
            .split(',')
            .collect();
        if header.len() < 3 || header[0] != "anchor" || header[header.len() - 2..] != ["target", "extrapolated"] {
            return Err(IngestError::malformed(2, "unexpected dataset header"));
        }
        let feature_names: Vec<String> = header[1..header.len() - 2].iter().map(|s| s.to_string()).collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let line_no = i as u64 + 3;
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != header.len() {
                return Err(IngestError::malformed(line_no, "column count mismatch"));
            }
            let number = |s: &str| -> Result<f64, IngestError> {
                s.parse()
                    .map_err(|_| IngestError::malformed(line_no, format!("bad number {s:?}")))
            };
            let anchor: DayIndex = cells[0]
                .parse()
                .map_err(|e: SeriesError| IngestError::malformed(line_no, e.to_string()))?;
            let features = cells[1..cells.len() - 2]
                .iter()
                .map(|s| number(s))
                .collect::<Result<Vec<_>, _>>()?;
            let target = number(cells[cells.len() - 2])?;
            let extrapolated = match cells[cells.len() - 1] {
                "0" => false,
                "1" => true,
                other => return Err(IngestError::malformed(line_no, format!("bad flag {other:?}"))),
            };
            rows.push(DatasetRow {
                anchor,
                features,
                target,
                extrapolated,
            });
        }
        ModelDataset::new(subject, feature_set, window, feature_names, rows)
    }
}

/// Builds one subject's supervised dataset: window sums of every feature in
/// `feature_set` (catalog order) against the interpolated poll share at
/// each anchor.
///
/// Rows cover the interaction days from the first poll onward; anchors past
/// the last poll carry the last poll value and are flagged `extrapolated`.
pub fn assemble_dataset(
    table: &InteractionTable,
    polls: &PollBook,
    subject: &SubjectId,
    feature_set: FeatureSet,
    window: usize,
    anchors: Anchors,
) -> Result<ModelDataset, IngestError> {
    let keys = table.subject_series(subject)?;
    let obs = polls
        .get(subject)
        .ok_or_else(|| IngestError::UnknownSubject(subject.to_string()))?;
    if window == 0 {
        return Err(SeriesError::ZeroWindow.into());
    }
    let (cov_start, cov_end) = table.coverage();
    let first_poll = obs.first_day().expect("non-empty poll series");
    let last_poll = obs.last_day().expect("non-empty poll series");
    let from = cov_start.max(first_poll);
    let polled_overlap = cov_end.min(last_poll).days_since(from) + 1;
    let usable = cov_end.days_since(from) + 1;
    if polled_overlap < 1 || usable < window as i64 {
        return Err(IngestError::InsufficientOverlap {
            subject: subject.to_string(),
            overlap: polled_overlap.max(0),
            window,
        });
    }
    let fs_keys = feature_set.keys();
    let columns = fs_keys
        .iter()
        .map(|k| {
            let sliced = keys[k].slice(from, cov_end).expect("overlap inside coverage");
            aggregate_window(&sliced, window, anchors)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let rows = (0..columns[0].len())
        .map(|i| {
            let anchor = columns[0][i].anchor;
            DatasetRow {
                anchor,
                features: columns.iter().map(|c| c[i].sum).collect(),
                target: obs.interpolate_at(anchor).expect("anchor after first poll"),
                extrapolated: anchor > last_poll,
            }
        })
        .collect();
    ModelDataset::new(
        subject.clone(),
        feature_set,
        window,
        fs_keys.iter().map(|k| k.label()).collect(),
        rows,
    )
}
