//! Polling rules and distributions over them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported poll size.
pub const MAX_POLL: u32 = 64;

/// Tolerance on the total weight of a [`RuleDistribution`].
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

/// An `(m, d)` update rule: poll `m` peers, flip when at least `d` of them disagree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawRule", into = "RawRule")]
pub struct PollingRule {
    m: u32,
    d: u32,
}

#[derive(Serialize, Deserialize)]
struct RawRule {
    m: u32,
    d: u32,
}

impl TryFrom<RawRule> for PollingRule {
    type Error = Error;
    fn try_from(raw: RawRule) -> Result<Self> {
        PollingRule::new(raw.m, raw.d)
    }
}

impl From<PollingRule> for RawRule {
    fn from(r: PollingRule) -> Self {
        RawRule { m: r.m, d: r.d }
    }
}

impl PollingRule {
    pub fn new(m: u32, d: u32) -> Result<Self> {
        if m == 0 || m > MAX_POLL {
            return Err(Error::InvalidRule(format!(
                "poll size m={m} outside 1..={MAX_POLL}"
            )));
        }
        if d == 0 || d > m {
            return Err(Error::InvalidRule(format!(
                "threshold d={d} outside 1..=m ({m})"
            )));
        }
        Ok(Self { m, d })
    }

    /// The classical voter model, `(1, 1)`.
    pub const fn voter() -> Self {
        Self { m: 1, d: 1 }
    }

    /// The unanimity rule `(m, m)`.
    pub fn unanimous(m: u32) -> Result<Self> {
        Self::new(m, m)
    }

    pub const fn m(&self) -> u32 {
        self.m
    }

    pub const fn d(&self) -> u32 {
        self.d
    }

    /// `2d > m`: a state change needs a strict majority of the poll.
    pub const fn is_strict_majority(&self) -> bool {
        2 * self.d > self.m
    }
}

impl fmt::Display for PollingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.m, self.d)
    }
}

impl FromStr for PollingRule {
    type Err = Error;

    /// Parses `"m:d"`.
    fn from_str(s: &str) -> Result<Self> {
        let (m, d) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidRule(format!("expected `m:d`, got `{s}`")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<u32>()
                .map_err(|e| Error::InvalidRule(format!("`{s}`: {e}")))
        };
        Self::new(parse(m)?, parse(d)?)
    }
}

/// One record of a rule file: `{m, d, weight}`; a lone record may omit the weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleRecord {
    pub m: u32,
    pub d: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

/// A finite probability distribution over polling rules.
///
/// Every update draws a fresh rule from this distribution. A single entry
/// with weight one is the deterministic `(m, d)` algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<RuleRecord>", into = "Vec<RuleRecord>")]
pub struct RuleDistribution {
    entries: Vec<(PollingRule, f64)>,
}

impl RuleDistribution {
    pub fn new(entries: Vec<(PollingRule, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidDistribution("no rules given".into()));
        }
        for &(rule, w) in &entries {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidDistribution(format!(
                    "weight {w} for rule {rule} is not strictly positive"
                )));
            }
        }
        let total: f64 = entries.iter().map(|e| e.1).sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { entries })
    }

    pub fn single(rule: PollingRule) -> Self {
        Self {
            entries: vec![(rule, 1.0)],
        }
    }

    /// `(1,1)` with probability `p`, `(2,2)` with probability `1 - p`.
    pub fn voter_pair_mixture(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("mixture weight p={p} outside [0,1]")));
        }
        let pair = PollingRule { m: 2, d: 2 };
        if p == 0.0 {
            return Ok(Self::single(pair));
        }
        if p == 1.0 {
            return Ok(Self::single(PollingRule::voter()));
        }
        Self::new(vec![(PollingRule::voter(), p), (pair, 1.0 - p)])
    }

    pub fn from_records(records: &[RuleRecord]) -> Result<Self> {
        match records {
            [] => Err(Error::InvalidDistribution("no rules given".into())),
            [only] => {
                let rule = PollingRule::new(only.m, only.d)?;
                match only.weight {
                    None => Ok(Self::single(rule)),
                    Some(w) => Self::new(vec![(rule, w)]),
                }
            }
            many => {
                let entries = many
                    .iter()
                    .map(|r| {
                        let rule = PollingRule::new(r.m, r.d)?;
                        let w = r.weight.ok_or_else(|| {
                            Error::InvalidDistribution(format!(
                                "rule {rule} has no weight; weights are required with several rules"
                            ))
                        })?;
                        Ok((rule, w))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::new(entries)
            }
        }
    }

    pub fn to_records(&self) -> Vec<RuleRecord> {
        self.entries
            .iter()
            .map(|&(r, w)| RuleRecord {
                m: r.m,
                d: r.d,
                weight: Some(w),
            })
            .collect()
    }

    pub fn entries(&self) -> &[(PollingRule, f64)] {
        &self.entries
    }

    /// The only rule, when the distribution is degenerate.
    pub fn as_single(&self) -> Option<PollingRule> {
        match self.entries.as_slice() {
            [(r, _)] => Some(*r),
            _ => None,
        }
    }

    /// Every rule satisfies `2d > m >= d`.
    pub fn is_strict_majority_as(&self) -> bool {
        self.entries.iter().all(|(r, _)| r.is_strict_majority())
    }

    pub fn max_poll(&self) -> u32 {
        self.entries.iter().map(|(r, _)| r.m).max().unwrap_or(0)
    }

    /// `E[f(M, D)]`.
    pub fn expectation(&self, mut f: impl FnMut(PollingRule) -> f64) -> f64 {
        self.entries.iter().map(|&(r, w)| w * f(r)).sum()
    }

    /// Inverse-CDF pick from a uniform `u` in `[0, 1)`.
    pub fn pick(&self, u: f64) -> PollingRule {
        let mut acc = 0.0;
        for &(r, w) in &self.entries {
            acc += w;
            if u < acc {
                return r;
            }
        }
        self.entries[self.entries.len() - 1].0
    }
}

impl TryFrom<Vec<RuleRecord>> for RuleDistribution {
    type Error = Error;
    fn try_from(v: Vec<RuleRecord>) -> Result<Self> {
        Self::from_records(&v)
    }
}

impl From<RuleDistribution> for Vec<RuleRecord> {
    fn from(d: RuleDistribution) -> Self {
        d.to_records()
    }
}

impl From<PollingRule> for RuleDistribution {
    fn from(r: PollingRule) -> Self {
        Self::single(r)
    }
}

impl fmt::Display for RuleDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(r) = self.as_single() {
            return write!(f, "{r}");
        }
        let parts: Vec<String> = self
            .entries
            .iter()
            .map(|(r, w)| format!("{r}@{w}"))
            .collect();
        write!(f, "{}", parts.join("+"))
    }
}

/// How a node draws its `m` peers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SamplingMode {
    /// Independent uniform draws from all `N` nodes (the node may poll itself).
    #[default]
    WithReplacement,
    /// `m` distinct nodes. With `exclude_self` the population is the other `N - 1` nodes.
    WithoutReplacement { exclude_self: bool },
}

impl SamplingMode {
    /// Without replacement, from all `N` nodes including the updating node.
    pub const WITHOUT: Self = Self::WithoutReplacement {
        exclude_self: false,
    };

    pub fn is_with_replacement(&self) -> bool {
        matches!(self, Self::WithReplacement)
    }
}

impl fmt::Display for SamplingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::WithReplacement => f.write_str("with"),
            Self::WithoutReplacement { exclude_self: false } => f.write_str("without"),
            Self::WithoutReplacement { exclude_self: true } => f.write_str("without-self"),
        }
    }
}

impl FromStr for SamplingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "with" => Ok(Self::WithReplacement),
            "without" => Ok(Self::WITHOUT),
            "without-self" => Ok(Self::WithoutReplacement { exclude_self: true }),
            other => Err(Error::Domain(format!(
                "unknown sampling mode `{other}` (expected with|without|without-self)"
            ))),
        }
    }
}
