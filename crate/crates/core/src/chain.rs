//! The one-dimensional count chain induced by a rule distribution.

use serde::Serialize;

use crate::error::{config_err, Error, Result};
use crate::rule::{RuleDistribution, SamplingMode};
use crate::tails::{binomial_tail_ge, hypergeometric_tail_ge};

/// Largest population for which rate tables are built.
pub const MAX_POPULATION: usize = 10_000_000;

/// A continuous-time birth–death chain on `{0, ..., N}`.
pub trait BirthDeath {
    /// `N`; the state space is `0..=N`.
    fn size(&self) -> usize;
    fn up_rate(&self, i: usize) -> f64;
    fn down_rate(&self, i: usize) -> f64;

    fn total_rate(&self, i: usize) -> f64 {
        self.up_rate(i) + self.down_rate(i)
    }
}

/// Explicit per-state rates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateTable {
    up: Vec<f64>,
    down: Vec<f64>,
}

impl RateTable {
    pub fn new(up: Vec<f64>, down: Vec<f64>) -> Result<Self> {
        if up.len() != down.len() || up.len() < 2 {
            return Err(Error::Domain(format!(
                "rate vectors of length {} and {} do not describe a chain",
                up.len(),
                down.len()
            )));
        }
        if let Some(bad) = up
            .iter()
            .chain(&down)
            .find(|r| !(r.is_finite() && **r >= 0.0))
        {
            return Err(Error::Domain(format!("rate {bad} is not a nonnegative number")));
        }
        Ok(Self { up, down })
    }

    /// Copy the rates of any chain.
    pub fn from_chain(chain: &impl BirthDeath) -> Self {
        let n = chain.size();
        Self {
            up: (0..=n).map(|i| chain.up_rate(i)).collect(),
            down: (0..=n).map(|i| chain.down_rate(i)).collect(),
        }
    }

    pub fn up(&self) -> &[f64] {
        &self.up
    }

    pub fn down(&self) -> &[f64] {
        &self.down
    }
}

impl BirthDeath for RateTable {
    fn size(&self) -> usize {
        self.up.len() - 1
    }
    fn up_rate(&self, i: usize) -> f64 {
        self.up[i]
    }
    fn down_rate(&self, i: usize) -> f64 {
        self.down[i]
    }
}

/// The number of nodes holding value 1, as a birth–death chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainModel {
    population: usize,
    rules: RuleDistribution,
    mode: SamplingMode,
    rates: RateTable,
}

impl ChainModel {
    pub fn population(&self) -> usize {
        self.population
    }

    pub fn rules(&self) -> &RuleDistribution {
        &self.rules
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    pub fn rates(&self) -> &RateTable {
        &self.rates
    }

    /// The chain of `min(X, N - X)` on `{0, ..., floor(N/2)}`.
    pub fn folded(&self) -> RateTable {
        fold(self)
    }
}

impl BirthDeath for ChainModel {
    fn size(&self) -> usize {
        self.population
    }
    fn up_rate(&self, i: usize) -> f64 {
        self.rates.up[i]
    }
    fn down_rate(&self, i: usize) -> f64 {
        self.rates.down[i]
    }
}

/// Probability that a node polling `m` peers sees at least `d` holding the
/// opposite value, when `opposite` of the `n` nodes hold it.
fn flip_probability(
    n: usize,
    opposite: usize,
    m: u32,
    d: u32,
    mode: SamplingMode,
) -> Result<f64> {
    match mode {
        SamplingMode::WithReplacement => binomial_tail_ge(m, opposite as f64 / n as f64, d),
        SamplingMode::WithoutReplacement { exclude_self } => {
            let pop = if exclude_self { n - 1 } else { n };
            hypergeometric_tail_ge(pop as u64, opposite as u64, m, d)
        }
    }
}

/// Builds the rate table of the count chain.
///
/// `up_rate[n] = (N - n) E[P(poll of a 0-node shows >= D ones)]` and
/// `down_rate[n] = n E[P(poll of a 1-node shows >= D zeros)]`. Both rates are
/// evaluated through the same expression with the roles of the two values
/// swapped, so `up_rate[n] == down_rate[N - n]` holds bit for bit.
pub fn build_chain(
    population: usize,
    rules: RuleDistribution,
    mode: SamplingMode,
) -> Result<ChainModel> {
    if population < 2 {
        return Err(config_err("n", format!("population {population} must be at least 2")));
    }
    if population > MAX_POPULATION {
        return Err(config_err(
            "n",
            format!("population {population} exceeds {MAX_POPULATION}"),
        ));
    }
    if !mode.is_with_replacement() && rules.max_poll() as usize > population - 1 {
        return Err(config_err(
            "mode",
            format!(
                "sampling without replacement needs m <= N-1, got m={} with N={population}",
                rules.max_poll()
            ),
        ));
    }

    let n = population;
    let flip_rate = |holders: usize, opposite: usize| -> Result<f64> {
        if holders == 0 {
            return Ok(0.0);
        }
        let mut e = 0.0;
        for &(rule, w) in rules.entries() {
            e += w * flip_probability(n, opposite, rule.m(), rule.d(), mode)?;
        }
        Ok(holders as f64 * e)
    };

    let mut up = vec![0.0; n + 1];
    let mut down = vec![0.0; n + 1];
    for i in 1..n {
        up[i] = flip_rate(n - i, i)?;
        down[i] = flip_rate(i, n - i)?;
    }
    Ok(ChainModel {
        population,
        rules,
        mode,
        rates: RateTable { up, down },
    })
}

/// Folds a chain symmetric under `i -> N - i` onto `{0, ..., floor(N/2)}`.
///
/// A move from `i` that lands on `N - j` is recorded as a move to `j`. At the top
/// state the upward move either reflects into a downward one (even `N`) or maps
/// back onto the same state and is dropped (odd `N`).
pub fn fold(chain: &impl BirthDeath) -> RateTable {
    let n = chain.size();
    let top = n / 2;
    let mut up = vec![0.0; top + 1];
    let mut down = vec![0.0; top + 1];
    for i in 0..=top {
        down[i] += chain.down_rate(i);
        let target = i + 1;
        if target <= n {
            let folded = target.min(n - target);
            if folded > i {
                up[i] += chain.up_rate(i);
            } else if folded < i {
                down[i] += chain.up_rate(i);
            }
        }
    }
    RateTable { up, down }
}
