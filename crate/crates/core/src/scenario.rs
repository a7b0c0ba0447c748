//! Undecided-voter redistribution and round-two vote-transfer scenarios.
//!
//! All arithmetic is full precision; rounding to one decimal happens only
//! when results are reported.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{SubjectId, UNDECIDED};

/// Slack allowed above 100 for rounded inputs.
pub const TOTAL_TOLERANCE: f64 = 0.05;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("share for {subject} is {share}, must be finite and non-negative")]
    InvalidShare { subject: String, share: f64 },
    #[error("shares total {total}, above 100")]
    TotalExceeds { total: f64 },
    #[error("subject {0} listed twice")]
    DuplicateSubject(String),
    #[error("every voter is undecided")]
    AllUndecided,
    #[error("rule {rule}: source {source_name} is not in the base vector")]
    UnknownSource { rule: String, source_name: String },
    #[error("rule {rule}: target {target} is not a finalist")]
    UnknownTarget { rule: String, target: String },
    #[error("rule {rule}: source {source_name} appears more than once")]
    DuplicateSource { rule: String, source_name: String },
    #[error("rule {rule}: split needs distinct, non-empty targets")]
    BadSplit { rule: String },
    #[error("rule {rule}: {pool} is neither a finalist nor a transferred pool")]
    UnassignedPool { rule: String, pool: String },
    #[error("finalists and pool must be distinct subjects")]
    DuplicateSubjects,
    #[error("need exactly two finalists, got {0}")]
    FinalistCount(usize),
    #[error("finalist {0} is not in the base vector")]
    UnknownFinalist(String),
    #[error("nothing to summarize")]
    EmptyInput,
    #[error("results do not cover the same subjects")]
    MismatchedResults,
    #[error("invalid scenario config: {0}")]
    Config(String),
    #[error("csv output failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Subject shares plus the undecided share, in percent.
#[derive(Debug, Clone, PartialEq)]
pub struct ShareVector {
    shares: Vec<(SubjectId, f64)>,
    undecided: f64,
}

impl ShareVector {
    pub fn new(shares: Vec<(SubjectId, f64)>, undecided: f64) -> Result<Self, ScenarioError> {
        for (i, (s, v)) in shares.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(ScenarioError::InvalidShare {
                    subject: s.to_string(),
                    share: *v,
                });
            }
            if shares[..i].iter().any(|(t, _)| t == s) {
                return Err(ScenarioError::DuplicateSubject(s.to_string()));
            }
        }
        if !undecided.is_finite() || undecided < 0.0 {
            return Err(ScenarioError::InvalidShare {
                subject: UNDECIDED.to_string(),
                share: undecided,
            });
        }
        let total = shares.iter().map(|(_, v)| v).sum::<f64>() + undecided;
        if total > 100.0 + TOTAL_TOLERANCE + 1e-9 {
            return Err(ScenarioError::TotalExceeds { total });
        }
        Ok(ShareVector { shares, undecided })
    }

    pub fn shares(&self) -> &[(SubjectId, f64)] {
        &self.shares
    }

    pub fn get(&self, subject: &SubjectId) -> Option<f64> {
        self.shares.iter().find(|(s, _)| s == subject).map(|(_, v)| *v)
    }

    pub fn undecided(&self) -> f64 {
        self.undecided
    }

    pub fn decided_total(&self) -> f64 {
        self.shares.iter().map(|(_, v)| v).sum()
    }

    pub fn total(&self) -> f64 {
        self.decided_total() + self.undecided
    }
}

/// Allocates undecided voters proportionally: every share is scaled by
/// `100 / decided total` and the undecided share becomes zero.
pub fn redistribute_undecided(v: &ShareVector) -> Result<ShareVector, ScenarioError> {
    let decided = v.decided_total();
    if decided <= 0.0 {
        return Err(ScenarioError::AllUndecided);
    }
    let factor = 100.0 / decided;
    Ok(ShareVector {
        shares: v.shares.iter().map(|(s, x)| (s.clone(), x * factor)).collect(),
        undecided: 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Source {
    Subject(SubjectId),
    Undecided,
}

impl Source {
    fn name(&self) -> String {
        match self {
            Source::Subject(s) => s.to_string(),
            Source::Undecided => "undecided".to_string(),
        }
    }

    /// `undecided` (or the poll-file marker) names the undecided pool.
    pub fn parse(name: &str) -> Result<Self, ScenarioError> {
        let trimmed = name.trim().to_lowercase();
        if trimmed == "undecided" || trimmed == UNDECIDED {
            return Ok(Source::Undecided);
        }
        SubjectId::new(name)
            .map(Source::Subject)
            .map_err(|e| ScenarioError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferAction {
    Exclude,
    AllTo(SubjectId),
    SplitEqual(Vec<SubjectId>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferRule {
    pub label: String,
    pub pools: Vec<(Source, TransferAction)>,
}

impl TransferRule {
    pub fn new(label: impl Into<String>, pools: Vec<(Source, TransferAction)>) -> Result<Self, ScenarioError> {
        let label = label.into();
        for (i, (source, action)) in pools.iter().enumerate() {
            if pools[..i].iter().any(|(s, _)| s == source) {
                return Err(ScenarioError::DuplicateSource {
                    rule: label,
                    source_name: source.name(),
                });
            }
            if let TransferAction::SplitEqual(targets) = action {
                let distinct = targets.iter().enumerate().all(|(j, t)| !targets[..j].contains(t));
                if targets.is_empty() || !distinct {
                    return Err(ScenarioError::BadSplit { rule: label });
                }
            }
        }
        Ok(TransferRule { label, pools })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundTwoResult {
    pub label: String,
    /// Full-precision final shares, in finalist order.
    pub shares: Vec<(SubjectId, f64)>,
    /// Mass removed by `Exclude` pools.
    pub excluded: f64,
}

impl RoundTwoResult {
    pub fn get(&self, subject: &SubjectId) -> Option<f64> {
        self.shares.iter().find(|(s, _)| s == subject).map(|(_, v)| *v)
    }

    pub fn total(&self) -> f64 {
        self.shares.iter().map(|(_, v)| v).sum()
    }
}

/// Rounds half away from zero at `decimals` places, treating values within
/// 1e-9 of a tie as the tie (so binary noise in `49.35` cannot round down).
pub fn round_half_up(x: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    let scaled = x.abs() * scale;
    let rounded = (scaled + 0.5 + 1e-9 * scale).floor() / scale;
    rounded.copysign(x)
}

/// Moves each pool in `rule` onto the two `finalists`. Finalists keep their
/// own base share; every other subject and a non-zero undecided share must
/// be handled by the rule.
pub fn apply_scenario(
    base: &ShareVector,
    finalists: &[SubjectId],
    rule: &TransferRule,
) -> Result<RoundTwoResult, ScenarioError> {
    if finalists.len() != 2 {
        return Err(ScenarioError::FinalistCount(finalists.len()));
    }
    if finalists[0] == finalists[1] {
        return Err(ScenarioError::DuplicateSubjects);
    }
    let mut shares: Vec<(SubjectId, f64)> = Vec::with_capacity(2);
    for f in finalists {
        let v = base.get(f).ok_or_else(|| ScenarioError::UnknownFinalist(f.to_string()))?;
        shares.push((f.clone(), v));
    }
    let unknown_target = |t: &SubjectId| ScenarioError::UnknownTarget {
        rule: rule.label.clone(),
        target: t.to_string(),
    };

    let mut excluded = 0.0;
    for (source, action) in &rule.pools {
        let mass = match source {
            Source::Undecided => base.undecided(),
            Source::Subject(s) if finalists.contains(s) => {
                return Err(ScenarioError::UnknownSource {
                    rule: rule.label.clone(),
                    source_name: s.to_string(),
                })
            }
            Source::Subject(s) => base.get(s).ok_or_else(|| ScenarioError::UnknownSource {
                rule: rule.label.clone(),
                source_name: s.to_string(),
            })?,
        };
        match action {
            TransferAction::Exclude => excluded += mass,
            TransferAction::AllTo(target) => {
                let slot = shares.iter_mut().find(|(s, _)| s == target).ok_or_else(|| unknown_target(target))?;
                slot.1 += mass;
            }
            TransferAction::SplitEqual(targets) => {
                let part = mass / targets.len() as f64;
                for target in targets {
                    let slot = shares.iter_mut().find(|(s, _)| s == target).ok_or_else(|| unknown_target(target))?;
                    slot.1 += part;
                }
            }
        }
    }

    let handled = |s: &Source| rule.pools.iter().any(|(p, _)| p == s);
    for (s, v) in base.shares() {
        if !finalists.contains(s) && *v > 0.0 && !handled(&Source::Subject(s.clone())) {
            return Err(ScenarioError::UnassignedPool {
                rule: rule.label.clone(),
                pool: s.to_string(),
            });
        }
    }
    if base.undecided() > 0.0 && !handled(&Source::Undecided) {
        return Err(ScenarioError::UnassignedPool {
            rule: rule.label.clone(),
            pool: "undecided".into(),
        });
    }
    Ok(RoundTwoResult {
        label: rule.label.clone(),
        shares,
        excluded,
    })
}

/// The ten standard rules `A` to `J` for finalists `a`, `b` and one
/// eliminated subject `pool`, plus the undecided share.
pub fn builtin_scenarios(a: &SubjectId, b: &SubjectId, pool: &SubjectId) -> Result<Vec<TransferRule>, ScenarioError> {
    if a == b || a == pool || b == pool {
        return Err(ScenarioError::DuplicateSubjects);
    }
    use TransferAction::{AllTo, Exclude, SplitEqual};
    let to_a = || AllTo(a.clone());
    let to_b = || AllTo(b.clone());
    let split = || SplitEqual(vec![a.clone(), b.clone()]);
    // (label, pool action, undecided action)
    let table = [
        ("A", Exclude, Exclude),
        ("B", to_b(), to_b()),
        ("C", to_b(), to_a()),
        ("D", to_a(), to_b()),
        ("E", to_a(), to_a()),
        ("F", split(), to_b()),
        ("G", split(), to_a()),
        ("H", to_b(), split()),
        ("I", to_a(), split()),
        ("J", split(), split()),
    ];
    table
        .into_iter()
        .map(|(label, pool_action, undecided_action)| {
            TransferRule::new(
                label,
                vec![
                    (Source::Subject(pool.clone()), pool_action),
                    (Source::Undecided, undecided_action),
                ],
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinalistSummary {
    pub subject: SubjectId,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

/// Range and unweighted mean of each finalist's share across `results`.
pub fn summarize(results: &[RoundTwoResult]) -> Result<Vec<FinalistSummary>, ScenarioError> {
    let first = results.first().ok_or(ScenarioError::EmptyInput)?;
    first
        .shares
        .iter()
        .map(|(subject, _)| {
            let values = results
                .iter()
                .map(|r| r.get(subject).ok_or(ScenarioError::MismatchedResults))
                .collect::<Result<Vec<f64>, _>>()?;
            Ok(FinalistSummary {
                subject: subject.clone(),
                min: values.iter().copied().fold(f64::INFINITY, f64::min),
                max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean: values.iter().sum::<f64>() / values.len() as f64,
            })
        })
        .collect()
}

/// CSV `scenario,subject,share_pct`, shares rounded half-up to one decimal.
pub fn write_results_csv<W: Write>(results: &[RoundTwoResult], mut writer: W) -> Result<(), ScenarioError> {
    writeln!(writer, "scenario,subject,share_pct")?;
    for r in results {
        for (s, v) in &r.shares {
            writeln!(writer, "{},{},{:.1}", r.label, s, round_half_up(*v, 1))?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolConfig {
    pub source: String,
    pub action: TransferAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleConfig {
    pub label: String,
    pub pools: Vec<PoolConfig>,
}

/// Scenario file contents. Either `builtin` is true (and `pool` names the
/// eliminated subject) or `rules` lists explicit transfer rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub base: BTreeMap<String, f64>,
    #[serde(default)]
    pub undecided: f64,
    pub finalists: Vec<String>,
    #[serde(default)]
    pub pool: Option<String>,
    #[serde(default)]
    pub builtin: bool,
    #[serde(default)]
    pub rules: Vec<RuleConfig>,
}

impl ScenarioConfig {
    pub fn base_vector(&self) -> Result<ShareVector, ScenarioError> {
        let shares = self
            .base
            .iter()
            .map(|(k, v)| Ok((subject(k)?, *v)))
            .collect::<Result<Vec<_>, ScenarioError>>()?;
        ShareVector::new(shares, self.undecided)
    }

    pub fn finalist_ids(&self) -> Result<Vec<SubjectId>, ScenarioError> {
        self.finalists.iter().map(|f| subject(f)).collect()
    }

    pub fn transfer_rules(&self) -> Result<Vec<TransferRule>, ScenarioError> {
        match (self.builtin, self.rules.is_empty()) {
            (true, true) => {
                let f = self.finalist_ids()?;
                if f.len() != 2 {
                    return Err(ScenarioError::FinalistCount(f.len()));
                }
                let pool = self
                    .pool
                    .as_deref()
                    .ok_or_else(|| ScenarioError::Config("builtin scenarios need `pool`".into()))?;
                builtin_scenarios(&f[0], &f[1], &subject(pool)?)
            }
            (false, false) => self
                .rules
                .iter()
                .map(|r| {
                    let pools = r
                        .pools
                        .iter()
                        .map(|p| Ok((Source::parse(&p.source)?, p.action.clone())))
                        .collect::<Result<Vec<_>, ScenarioError>>()?;
                    TransferRule::new(r.label.clone(), pools)
                })
                .collect(),
            (true, false) => Err(ScenarioError::Config("set either `builtin` or `rules`, not both".into())),
            (false, true) => Err(ScenarioError::Config("no rules given and `builtin` is false".into())),
        }
    }

    /// Applies every configured rule to the base vector.
    pub fn run(&self) -> Result<Vec<RoundTwoResult>, ScenarioError> {
        let base = self.base_vector()?;
        let finalists = self.finalist_ids()?;
        self.transfer_rules()?
            .iter()
            .map(|rule| apply_scenario(&base, &finalists, rule))
            .collect()
    }
}

fn subject(name: &str) -> Result<SubjectId, ScenarioError> {
    SubjectId::new(name).map_err(|e| ScenarioError::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> SubjectId {
        SubjectId::new(s).unwrap()
    }

    fn round_two_base() -> ShareVector {
        ShareVector::new(vec![(id("kk"), 45.0), (id("rte"), 46.3), (id("ogan"), 5.2)], 3.5).unwrap()
    }

    fn run_builtin() -> Vec<RoundTwoResult> {
        let rules = builtin_scenarios(&id("kk"), &id("rte"), &id("ogan")).unwrap();
        rules
            .iter()
            .map(|r| apply_scenario(&round_two_base(), &[id("kk"), id("rte")], r).unwrap())
            .collect()
    }

    #[test]
    fn redistribution_examples() {
        let v = ShareVector::new(vec![(id("a"), 44.0), (id("b"), 42.0), (id("others"), 5.5)], 8.5).unwrap();
        let r = redistribute_undecided(&v).unwrap();
        assert_eq!(round_half_up(r.get(&id("a")).unwrap(), 1), 48.1);
        assert_eq!(round_half_up(r.get(&id("b")).unwrap(), 1), 45.9);
        assert_eq!(r.undecided(), 0.0);

        let v = ShareVector::new(vec![(id("a"), 40.0), (id("b"), 40.0)], 20.0).unwrap();
        let r = redistribute_undecided(&v).unwrap();
        assert_eq!(r.get(&id("a")), Some(50.0));

        let v = ShareVector::new(vec![(id("a"), 60.0), (id("b"), 40.0)], 0.0).unwrap();
        assert_eq!(redistribute_undecided(&v).unwrap(), v);

        let v = ShareVector::new(vec![(id("a"), 0.0)], 100.0).unwrap();
        assert!(matches!(redistribute_undecided(&v), Err(ScenarioError::AllUndecided)));
    }

    #[test]
    fn share_vector_validation() {
        assert!(matches!(
            ShareVector::new(vec![(id("a"), 60.0), (id("b"), 41.0)], 0.0),
            Err(ScenarioError::TotalExceeds { .. })
        ));
        assert!(ShareVector::new(vec![(id("a"), 60.0), (id("b"), 40.05)], 0.0).is_ok());
        assert!(matches!(
            ShareVector::new(vec![(id("a"), -1.0)], 0.0),
            Err(ScenarioError::InvalidShare { .. })
        ));
        assert!(matches!(
            ShareVector::new(vec![(id("a"), 1.0), (id("A "), 2.0)], 0.0),
            Err(ScenarioError::DuplicateSubject(_))
        ));
    }

    #[test]
    fn published_scenarios() {
        let results = run_builtin();
        let kk = id("kk");
        let rte = id("rte");
        let c = &results[2];
        assert_eq!(c.label, "C");
        assert_eq!(round_half_up(c.get(&kk).unwrap(), 1), 48.5);
        assert_eq!(round_half_up(c.get(&rte).unwrap(), 1), 51.5);
        let j = &results[9];
        assert_eq!(round_half_up(j.get(&kk).unwrap(), 1), 49.4);
        assert_eq!(round_half_up(j.get(&rte).unwrap(), 1), 50.7);
        let a = &results[0];
        assert_eq!(a.get(&kk), Some(45.0));
        assert_eq!(a.get(&rte), Some(46.3));
        assert!((a.excluded - 8.7).abs() < 1e-12);
        assert_eq!(round_half_up(results[4].get(&kk).unwrap(), 1), 53.7);
        // B: everything to the second finalist
        assert_eq!(results[1].get(&rte), Some(46.3 + 5.2 + 3.5));
    }

    #[test]
    fn mass_is_conserved_unless_excluded() {
        let base = round_two_base();
        for r in run_builtin().iter().skip(1) {
            assert!((r.total() - base.total()).abs() < 1e-9, "{}", r.label);
            assert_eq!(r.excluded, 0.0);
        }
    }

    #[test]
    fn mirrored_pairs_swap_deltas() {
        let results = run_builtin();
        let base = round_two_base();
        let delta = |r: &RoundTwoResult, s: &str| r.get(&id(s)).unwrap() - base.get(&id(s)).unwrap();
        for (x, y) in [(2, 3), (5, 6), (7, 8)] {
            assert!((delta(&results[x], "kk") - delta(&results[y], "rte")).abs() < 1e-12);
            assert!((delta(&results[x], "rte") - delta(&results[y], "kk")).abs() < 1e-12);
        }
    }

    #[test]
    fn summary_ranges() {
        let results = run_builtin();
        let s = summarize(&results).unwrap();
        assert_eq!(round_half_up(s[0].min, 1), 45.0);
        assert_eq!(round_half_up(s[0].max, 1), 53.7);
        assert_eq!(round_half_up(s[1].min, 1), 46.3);
        assert_eq!(round_half_up(s[1].max, 1), 55.0);
        // without A: (48.5+50.2+53.7+47.6+51.1+46.75+51.95+49.35+45) / 9
        let nine = summarize(&results[1..]).unwrap();
        let hand = (45.0 + 48.5 + 50.2 + 53.7 + 47.6 + 51.1 + 46.75 + 51.95 + 49.35) / 9.0;
        assert!((nine[0].mean - hand).abs() < 1e-9);
        assert_eq!(round_half_up(nine[0].mean, 1), 49.4);
        assert_eq!(round_half_up(nine[1].mean, 1), 50.7);

        let one = summarize(&results[..1]).unwrap();
        assert_eq!(one[0].min, one[0].max);
        assert_eq!(one[0].min, one[0].mean);
        assert!(matches!(summarize(&[]), Err(ScenarioError::EmptyInput)));
    }

    #[test]
    fn rule_errors() {
        let base = round_two_base();
        let f = [id("kk"), id("rte")];
        let rule = TransferRule::new(
            "x",
            vec![
                (Source::Subject(id("ince")), TransferAction::Exclude),
                (Source::Undecided, TransferAction::Exclude),
            ],
        )
        .unwrap();
        assert!(matches!(apply_scenario(&base, &f, &rule), Err(ScenarioError::UnknownSource { .. })));
        let rule = TransferRule::new(
            "x",
            vec![
                (Source::Subject(id("ogan")), TransferAction::AllTo(id("ogan"))),
                (Source::Undecided, TransferAction::Exclude),
            ],
        )
        .unwrap();
        assert!(matches!(apply_scenario(&base, &f, &rule), Err(ScenarioError::UnknownTarget { .. })));
        let rule = TransferRule::new("x", vec![(Source::Undecided, TransferAction::Exclude)]).unwrap();
        assert!(matches!(apply_scenario(&base, &f, &rule), Err(ScenarioError::UnassignedPool { .. })));
        assert!(matches!(
            TransferRule::new("x", vec![(Source::Undecided, TransferAction::SplitEqual(vec![]))]),
            Err(ScenarioError::BadSplit { .. })
        ));
        assert!(matches!(
            TransferRule::new(
                "x",
                vec![
                    (Source::Undecided, TransferAction::Exclude),
                    (Source::Undecided, TransferAction::Exclude)
                ]
            ),
            Err(ScenarioError::DuplicateSource { .. })
        ));
        assert!(matches!(
            builtin_scenarios(&id("kk"), &id("kk"), &id("ogan")),
            Err(ScenarioError::DuplicateSubjects)
        ));
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(round_half_up(49.35, 1), 49.4);
        assert_eq!(round_half_up(50.65, 1), 50.7);
        assert_eq!(round_half_up(46.75, 1), 46.8);
        assert_eq!(round_half_up(48.04, 1), 48.0);
        assert_eq!(round_half_up(0.05, 1), 0.1);
        assert_eq!(round_half_up(2.5, 0), 3.0);
    }

    #[test]
    fn csv_shape() {
        let mut out = Vec::new();
        write_results_csv(&run_builtin(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "scenario,subject,share_pct");
        assert_eq!(lines.len(), 21);
        assert_eq!(lines[19], "J,kk,49.4");
    }
}
