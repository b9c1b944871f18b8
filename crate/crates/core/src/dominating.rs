//! The three-region dominating chain used to bound the consensus time.
//!
//! `Y` moves like a walk with drift `beta` towards the nearer boundary outside a
//! central band of width `eps N` and like a symmetric walk inside it. Its folded
//! version stochastically dominates the folded consensus chain, which gives an
//! explicit `O(log N)` bound on the expected consensus time.

use serde::Serialize;

use crate::chain::{build_chain, fold, BirthDeath, RateTable};
use crate::error::{Error, Result};
use crate::rule::{PollingRule, RuleDistribution, SamplingMode};
use crate::sim::{par_replicas, replica_rng, Estimate, JumpTable, Stops};
use crate::stats::{ks_one_sided, ks_two_sample, KsTest};
use crate::tails::{binomial_tail_ge, binomial_tail_le};

/// Significance level of the domination verdicts.
pub const DOMINATION_SIGNIFICANCE: f64 = 0.01;

/// Relative slack allowed in the grid inequalities.
const GRID_TOLERANCE: f64 = 1e-12;

/// Which formula sets `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaConvention {
    /// `(1-eps) c1 / ((1-eps) c1 + (1+eps) c2)`: the outer-region lower bound on
    /// the consensus chain's down-jump probability. Always above 1/2.
    #[default]
    Corrected,
    /// `(1-eps) c2 / ((1-eps) c2 + (1+eps) c1)`, with `c1` and `c2` swapped.
    /// Below 1/2 for strict-majority rules; kept for comparison only.
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Lower,
    Band,
    Upper,
}

/// The dominating chain `Y` on `{0, ..., N}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominatingChain {
    n: usize,
    epsilon: f64,
    rule: PollingRule,
    convention: BetaConvention,
    beta: f64,
    c1: f64,
    c2: f64,
    jump_prob_down: Vec<f64>,
    holding_rate: Vec<f64>,
}

impl DominatingChain {
    pub fn population(&self) -> usize {
        self.n
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn rule(&self) -> PollingRule {
        self.rule
    }

    pub fn convention(&self) -> BetaConvention {
        self.convention
    }

    /// Down-jump probability in the lower region.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Holding-rate constant of the outer regions.
    pub fn c1(&self) -> f64 {
        self.c1
    }

    /// Holding-rate constant of the band.
    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn jump_prob_down(&self) -> &[f64] {
        &self.jump_prob_down
    }

    pub fn holding_rate(&self) -> &[f64] {
        &self.holding_rate
    }

    pub fn region(&self, i: usize) -> Region {
        region(self.n, self.epsilon, i)
    }

    /// Inclusive bounds of the central band.
    pub fn band(&self) -> (usize, usize) {
        let lo = (0..=self.n).find(|&i| self.region(i) == Region::Band);
        let hi = (0..=self.n).rev().find(|&i| self.region(i) == Region::Band);
        match (lo, hi) {
            (Some(lo), Some(hi)) => (lo, hi),
            _ => unreachable!("the band always contains floor(N/2)"),
        }
    }
}

impl BirthDeath for DominatingChain {
    fn size(&self) -> usize {
        self.n
    }
    fn up_rate(&self, i: usize) -> f64 {
        self.holding_rate[i] * (1.0 - self.jump_prob_down[i])
    }
    fn down_rate(&self, i: usize) -> f64 {
        self.holding_rate[i] * self.jump_prob_down[i]
    }
}

fn region(n: usize, eps: f64, i: usize) -> Region {
    let (twice, nf) = (2.0 * i as f64, n as f64);
    if twice < (1.0 - eps) * nf {
        Region::Lower
    } else if twice <= (1.0 + eps) * nf {
        Region::Band
    } else {
        Region::Upper
    }
}

/// `(c1, c2)`: `P(Z <= m - d)` and `P(Z >= d)` for `Z ~ Bin(m, (1 - eps)/2)`.
pub fn holding_constants(rule: PollingRule, epsilon: f64) -> Result<(f64, f64)> {
    let x = (1.0 - epsilon) / 2.0;
    Ok((
        binomial_tail_le(rule.m(), x, rule.m() - rule.d())?,
        binomial_tail_ge(rule.m(), x, rule.d())?,
    ))
}

/// Builds `Y` with the corrected `beta`.
pub fn build_dominating(n: usize, epsilon: f64, rule: PollingRule) -> Result<DominatingChain> {
    build_dominating_with(n, epsilon, rule, BetaConvention::Corrected)
}

pub fn build_dominating_with(
    n: usize,
    epsilon: f64,
    rule: PollingRule,
    convention: BetaConvention,
) -> Result<DominatingChain> {
    if !rule.is_strict_majority() {
        return Err(Error::Domain(format!("{rule} is not a strict-majority rule")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("epsilon {epsilon} outside (0, 1)")));
    }
    if n < 2 {
        return Err(Error::Domain(format!("population {n} below 2")));
    }
    let (c1, c2) = holding_constants(rule, epsilon)?;
    let (a, b) = match convention {
        BetaConvention::Corrected => (c1, c2),
        BetaConvention::AsPrinted => (c2, c1),
    };
    let beta = (1.0 - epsilon) * a / ((1.0 - epsilon) * a + (1.0 + epsilon) * b);
    if convention == BetaConvention::Corrected && beta <= 0.5 {
        return Err(Error::Domain(format!("beta {beta} not above 1/2")));
    }
    let nf = n as f64;
    let mut jump_prob_down = vec![0.0; n + 1];
    let mut holding_rate = vec![0.0; n + 1];
    for i in 1..n {
        let (p, rate) = match region(n, epsilon, i) {
            Region::Lower => (beta, c1 * i as f64),
            Region::Band => (0.5, c2 * nf),
            Region::Upper => (1.0 - beta, c1 * (n - i) as f64),
        };
        jump_prob_down[i] = p;
        holding_rate[i] = rate;
    }
    Ok(DominatingChain {
        n,
        epsilon,
        rule,
        convention,
        beta,
        c1,
        c2,
        jump_prob_down,
        holding_rate,
    })
}

fn check_beta(beta: f64) -> Result<f64> {
    if !(beta > 0.5 && beta < 1.0) {
        return Err(Error::Domain(format!("beta {beta} outside (1/2, 1)")));
    }
    Ok((beta / (1.0 - beta)).ln())
}

/// Probability that a walk with down-probability `beta` started at `i` hits `j`
/// before 0.
pub fn gambler_ruin_hit(i: usize, j: usize, beta: f64) -> Result<f64> {
    let ln_r = check_beta(beta)?;
    if j == 0 {
        return Err(Error::Domain("target state must be positive".into()));
    }
    if i >= j {
        return Ok(1.0);
    }
    let (a, b) = (i as f64 * ln_r, j as f64 * ln_r);
    // (r^i - 1)/(r^j - 1) = r^(i-j) (1 - r^-i)/(1 - r^-j)
    Ok((a - b).exp() * (-a).exp_m1() / (-b).exp_m1())
}

/// The `beta = 1/2` limit of [`gambler_ruin_hit`]: `i / j`.
pub fn gambler_ruin_hit_symmetric(i: usize, j: usize) -> Result<f64> {
    if j == 0 {
        return Err(Error::Domain("target state must be positive".into()));
    }
    Ok((i.min(j)) as f64 / j as f64)
}

/// Mean number of visits to `j` before absorption at 0, given one visit:
/// `(1 - ((1 - beta)/beta)^j) / (2 beta - 1)`.
pub fn expected_visits(j: usize, beta: f64) -> Result<f64> {
    let ln_r = check_beta(beta)?;
    if j == 0 {
        return Err(Error::Domain("state must be positive".into()));
    }
    let cap = 1.0 / (2.0 * beta - 1.0);
    let n = -(-(j as f64) * ln_r).exp_m1() * cap;
    debug_assert!(n <= cap);
    Ok(n)
}

/// `(1/(2 beta - 1)) (sum_{j < ceil((1-eps)N/2)} 1/(j c1) + eps/c2)`.
pub fn tau0_upper_bound(chain: &DominatingChain) -> Result<f64> {
    check_beta(chain.beta)?;
    let top = ((1.0 - chain.epsilon) * chain.n as f64 / 2.0).ceil() as usize;
    let harmonic: f64 = (1..top).map(|j| 1.0 / j as f64).sum();
    Ok((harmonic / chain.c1 + chain.epsilon / chain.c2) / (2.0 * chain.beta - 1.0))
}

/// Outcome of comparing the folded consensus chain with the folded `Y` state by state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCheck {
    pub states_checked: usize,
    /// States where the consensus chain's down-jump probability falls below `Y`'s.
    pub jump_violations: Vec<usize>,
    /// States where the consensus chain's exit rate falls below `Y`'s.
    pub rate_violations: Vec<usize>,
    /// `min_i (p_down_X(i) - p_down_Y(i))`.
    pub min_jump_margin: f64,
    /// `min_i (exit_X(i) / exit_Y(i))`.
    pub min_rate_ratio: f64,
}

impl GridCheck {
    pub fn holds(&self) -> bool {
        self.jump_violations.is_empty() && self.rate_violations.is_empty()
    }
}

fn down_probability(chain: &RateTable, i: usize) -> f64 {
    chain.down_rate(i) / chain.total_rate(i)
}

/// Checks both per-state comparisons the domination argument needs, on every
/// transient state of the folded chains.
pub fn check_grid(chain: &DominatingChain) -> Result<GridCheck> {
    let x = fold(&build_chain(
        chain.n,
        RuleDistribution::single(chain.rule),
        SamplingMode::WithReplacement,
    )?);
    let y = fold(chain);
    let mut check = GridCheck {
        states_checked: 0,
        jump_violations: Vec::new(),
        rate_violations: Vec::new(),
        min_jump_margin: f64::INFINITY,
        min_rate_ratio: f64::INFINITY,
    };
    for i in 1..=x.size() {
        check.states_checked += 1;
        let margin = down_probability(&x, i) - down_probability(&y, i);
        if margin < -GRID_TOLERANCE {
            check.jump_violations.push(i);
        }
        let ratio = x.total_rate(i) / y.total_rate(i);
        if ratio < 1.0 - GRID_TOLERANCE {
            check.rate_violations.push(i);
        }
        check.min_jump_margin = check.min_jump_margin.min(margin);
        check.min_rate_ratio = check.min_rate_ratio.min(ratio);
    }
    Ok(check)
}

fn run_until(
    table: &JumpTable,
    start: usize,
    stops: Stops,
    seed: u64,
    replica: u64,
) -> (Option<f64>, Option<f64>) {
    let p = table.run(start, &stops, &mut replica_rng(seed, replica), None);
    let stopped = p.state <= stops.lower || p.state >= stops.upper;
    (stopped.then_some(p.time), p.watch_time)
}

const EVENT_CAP: u64 = 1_000_000_000;

fn collect_complete(samples: &[Option<f64>]) -> Result<Vec<f64>> {
    let v: Vec<f64> = samples.iter().flatten().copied().collect();
    if v.len() < 2 {
        return Err(Error::NoSamples(format!("{} finished paths", v.len())));
    }
    Ok(v)
}

/// Exit times of `Y` from its central band, entered at the lower edge.
pub fn band_excursion_times(
    chain: &DominatingChain,
    replicas: u64,
    seed: u64,
    threads: Option<usize>,
) -> Result<Vec<f64>> {
    let (lo, hi) = chain.band();
    let table = JumpTable::new(chain);
    let stops = Stops {
        lower: lo - 1,
        upper: hi + 1,
        watch: (0, usize::MAX),
        max_time: f64::INFINITY,
        max_events: EVENT_CAP,
    };
    let times = par_replicas(replicas, threads, |r| run_until(&table, lo, stops, seed, r).0)?;
    collect_complete(&times)
}

/// Absorption times at 0 of a folded chain started at `start`.
pub fn folded_absorption_times(
    chain: &impl BirthDeath,
    start: usize,
    replicas: u64,
    seed: u64,
    threads: Option<usize>,
) -> Result<Vec<f64>> {
    let folded = fold(chain);
    let table = JumpTable::new(&folded);
    let stops = Stops {
        lower: 0,
        upper: usize::MAX,
        watch: (0, usize::MAX),
        max_time: f64::INFINITY,
        max_events: EVENT_CAP,
    };
    let times = par_replicas(replicas, threads, |r| {
        run_until(&table, start, stops, seed, r).0
    })?;
    collect_complete(&times)
}

/// Empirical comparison of two folded chains from a common start.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathComparison {
    pub start: usize,
    pub level: usize,
    pub replicas: u64,
    pub absorption_x: Estimate,
    pub absorption_y: Estimate,
    pub level_x: Estimate,
    pub level_y: Estimate,
    /// One-sided test of `X <=_st Y` on absorption times.
    pub absorption_one_sided: KsTest,
    /// One-sided test of `X <=_st Y` on first passage to `<= level`.
    pub level_one_sided: KsTest,
    pub absorption_two_sided: KsTest,
    pub level_two_sided: KsTest,
}

struct Samples {
    absorption: Vec<f64>,
    level: Vec<f64>,
}

fn sample_paths(
    chain: &impl BirthDeath,
    start: usize,
    level: usize,
    replicas: u64,
    seed: u64,
    stream: u64,
    threads: Option<usize>,
) -> Result<Samples> {
    let folded = fold(chain);
    let table = JumpTable::new(&folded);
    let stops = Stops {
        lower: 0,
        upper: usize::MAX,
        watch: (level, usize::MAX),
        max_time: f64::INFINITY,
        max_events: EVENT_CAP,
    };
    // Streams 2r and 2r + 1 keep the two chains independent.
    let runs = par_replicas(replicas, threads, |r| {
        run_until(&table, start, stops, seed, 2 * r + stream)
    })?;
    let (abs, lev): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    Ok(Samples {
        absorption: collect_complete(&abs)?,
        level: collect_complete(&lev)?,
    })
}

/// Simulates folded `x` and folded `y` independently from `start` and compares
/// their absorption times and first passages to `<= level`.
pub fn compare_folded(
    x: &impl BirthDeath,
    y: &impl BirthDeath,
    start: usize,
    level: usize,
    replicas: u64,
    seed: u64,
    threads: Option<usize>,
) -> Result<PathComparison> {
    let top = x.size() / 2;
    if start == 0 || start > top || y.size() != x.size() {
        return Err(Error::Domain(format!(
            "start {start} outside 1..={top} or mismatched chains"
        )));
    }
    if level >= start {
        return Err(Error::Domain(format!("level {level} not below start {start}")));
    }
    let sx = sample_paths(x, start, level, replicas, seed, 0, threads)?;
    let sy = sample_paths(y, start, level, replicas, seed, 1, threads)?;
    Ok(PathComparison {
        start,
        level,
        replicas,
        absorption_x: Estimate::mean(&sx.absorption),
        absorption_y: Estimate::mean(&sy.absorption),
        level_x: Estimate::mean(&sx.level),
        level_y: Estimate::mean(&sy.level),
        absorption_one_sided: ks_one_sided(&sx.absorption, &sy.absorption),
        level_one_sided: ks_one_sided(&sx.level, &sy.level),
        absorption_two_sided: ks_two_sample(&sx.absorption, &sy.absorption),
        level_two_sided: ks_two_sample(&sx.level, &sy.level),
    })
}

/// JSON-ready result of [`check_domination`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominationReport {
    pub n: usize,
    pub epsilon: f64,
    pub rule: PollingRule,
    pub seed: u64,
    pub beta: f64,
    pub c1: f64,
    pub c2: f64,
    pub tau0_bound: f64,
    pub grid: GridCheck,
    pub comparison: PathComparison,
    pub significance: f64,
    /// No one-sided test rejects `X <=_st Y` at the significance level.
    pub dominated: bool,
    /// Mean absorption time of `X` does not exceed that of `Y` beyond 3 stderr.
    pub means_ordered: bool,
}

/// Parameters of a domination experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DominationConfig {
    pub n: usize,
    pub epsilon: f64,
    pub rule: PollingRule,
    /// Common start of both folded chains; must lie in the lower region.
    pub start: usize,
    /// Level for the first-passage comparison.
    pub level: usize,
    pub replicas: u64,
    pub seed: u64,
}

/// Checks the stochastic ordering implied by the coupling between the folded
/// consensus chain and the folded dominating chain.
pub fn check_domination(config: &DominationConfig, threads: Option<usize>) -> Result<DominationReport> {
    let DominationConfig {
        n,
        epsilon,
        rule,
        start,
        level,
        replicas,
        seed,
    } = *config;
    let y = build_dominating(n, epsilon, rule)?;
    if start == 0 || y.region(start) != Region::Lower {
        return Err(Error::Domain(format!(
            "start {start} outside (0, (1 - eps) N / 2)"
        )));
    }
    let x = build_chain(n, RuleDistribution::single(rule), SamplingMode::WithReplacement)?;
    let comparison = compare_folded(&x, &y, start, level, replicas, seed, threads)?;
    let dominated = comparison.absorption_one_sided.p_value >= DOMINATION_SIGNIFICANCE
        && comparison.level_one_sided.p_value >= DOMINATION_SIGNIFICANCE;
    let (ax, ay) = (&comparison.absorption_x, &comparison.absorption_y);
    let means_ordered = ax.point - ay.point <= 3.0 * ax.stderr.hypot(ay.stderr);
    Ok(DominationReport {
        n,
        epsilon,
        rule,
        seed,
        beta: y.beta,
        c1: y.c1,
        c2: y.c2,
        tau0_bound: tau0_upper_bound(&y)?,
        grid: check_grid(&y)?,
        comparison,
        significance: DOMINATION_SIGNIFICANCE,
        dominated,
        means_ordered,
    })
}

/// Compares the folded consensus chain with an independent copy of itself.
pub fn check_self_comparison(
    n: usize,
    rule: PollingRule,
    start: usize,
    level: usize,
    replicas: u64,
    seed: u64,
    threads: Option<usize>,
) -> Result<PathComparison> {
    let x = build_chain(n, RuleDistribution::single(rule), SamplingMode::WithReplacement)?;
    compare_folded(&x, &x, start, level, replicas, seed, threads)
}
