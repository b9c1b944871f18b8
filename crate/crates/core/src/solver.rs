//! Exact absorption probabilities and expected times of a birth–death chain.
//!
//! Hitting probabilities come from the series resistor network whose
//! consecutive resistances have ratio `R_{i+1} / R_i = down_rate[i] / up_rate[i]`.
//! With `R_1 = 1` the voltage at junction `i` is `sum_{j<=i} R_j / sum_j R_j`,
//! which is the probability of reaching `N` before `0` from `i`. Resistances
//! span hundreds of orders of magnitude, so everything is kept in log space.
//!
//! Expected times solve the first-step equations of the jump chain with
//! exponential holding times, by a forward/backward tridiagonal sweep.

use serde::Serialize;

use crate::chain::BirthDeath;
use crate::error::{Error, Result};
use crate::numeric::{ln_binomial, log_add_exp, log_sum_exp};

/// Hitting probabilities of state `N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingProbabilities {
    n: usize,
    /// `log_resistor[j - 1] = ln R_j`, `j = 1..=N`. Edges shorted to an
    /// absorbing side (see [`hitting_probabilities`]) hold `-inf`.
    log_resistor: Vec<f64>,
    h: Vec<f64>,
    log_h: Vec<f64>,
}

impl HittingProbabilities {
    pub fn population(&self) -> usize {
        self.n
    }

    /// `P(reach N before 0 | start at i)`, `i = 0..=N`.
    pub fn h(&self) -> &[f64] {
        &self.h
    }

    /// `ln h[i]`, accurate even where `h[i]` is far below `f64::MIN_POSITIVE`.
    pub fn log_h(&self) -> &[f64] {
        &self.log_h
    }

    pub fn log_resistor(&self) -> &[f64] {
        &self.log_resistor
    }

    /// `h_N(alpha)`, linearly interpolated between grid points.
    pub fn interpolate(&self, alpha: f64) -> Result<f64> {
        let (lo, hi, w) = self.bracket(alpha)?;
        Ok(w * self.h[hi] + (1.0 - w) * self.h[lo])
    }

    /// `ln h_N(alpha)` of the interpolated value, computed in log space.
    pub fn interpolate_log(&self, alpha: f64) -> Result<f64> {
        let (lo, hi, w) = self.bracket(alpha)?;
        if w == 0.0 {
            return Ok(self.log_h[lo]);
        }
        if w == 1.0 {
            return Ok(self.log_h[hi]);
        }
        Ok(log_add_exp(
            w.ln() + self.log_h[hi],
            (1.0 - w).ln() + self.log_h[lo],
        ))
    }

    fn bracket(&self, alpha: f64) -> Result<(usize, usize, f64)> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Domain(format!("alpha {alpha} outside [0,1]")));
        }
        let scaled = alpha * self.n as f64;
        let lo = scaled.floor();
        let hi = scaled.ceil();
        let w = scaled - lo;
        Ok((lo as usize, (hi as usize).min(self.n), w))
    }
}

/// `h_N(alpha)` by linear interpolation between grid points.
pub fn h_interpolated(result: &HittingProbabilities, alpha: f64) -> Result<f64> {
    result.interpolate(alpha)
}

/// Hitting probabilities of `N` from every state.
///
/// States from which the chain cannot move up (`up_rate = 0`) cut the
/// network: everything at or below the highest such state reaches `0` first,
/// and symmetrically for `down_rate = 0`. This only happens when sampling
/// without replacement puts too few nodes of one value in reach, or when a
/// tail underflows. A state from which neither side is reachable is an error.
pub fn hitting_probabilities(chain: &impl BirthDeath) -> Result<HittingProbabilities> {
    let n = chain.size();
    if n < 1 {
        return Err(Error::Domain("chain needs at least two states".into()));
    }
    let (lo, hi) = active_range(chain)?;

    // Edge j joins states j-1 and j; only edges lo+1..=hi carry current.
    let mut log_r = vec![f64::NEG_INFINITY; n];
    if lo < hi {
        log_r[lo] = 0.0;
        for i in (lo + 1)..hi {
            log_r[i] = log_r[i - 1] + chain.down_rate(i).ln() - chain.up_rate(i).ln();
        }
    }

    // prefix[i] = ln sum_{j<=i} R_j, suffix[i] = ln sum_{j>i} R_j
    let mut prefix = vec![f64::NEG_INFINITY; n + 1];
    for i in 1..=n {
        prefix[i] = log_add_exp(prefix[i - 1], log_r[i - 1]);
    }
    let mut suffix = vec![f64::NEG_INFINITY; n + 1];
    for i in (0..n).rev() {
        suffix[i] = log_add_exp(suffix[i + 1], log_r[i]);
    }
    let total = prefix[n];

    let mut h = vec![0.0; n + 1];
    let mut log_h = vec![f64::NEG_INFINITY; n + 1];
    for i in 0..=n {
        let below = prefix[i] - total;
        let above = suffix[i] - total;
        if below <= above {
            log_h[i] = below;
            h[i] = below.exp();
        } else {
            let rest = above.exp();
            h[i] = 1.0 - rest;
            log_h[i] = (-rest).ln_1p();
        }
    }
    h[0] = 0.0;
    log_h[0] = f64::NEG_INFINITY;
    h[n] = 1.0;
    log_h[n] = 0.0;

    Ok(HittingProbabilities {
        n,
        log_resistor: log_r,
        h,
        log_h,
    })
}

/// `(lo, hi)`: states `<= lo` surely end at 0 and states `>= hi` surely end at N.
fn active_range(chain: &impl BirthDeath) -> Result<(usize, usize)> {
    let n = chain.size();
    let lo = (1..n).rev().find(|&i| chain.up_rate(i) == 0.0).unwrap_or(0);
    let hi = (1..n).find(|&i| chain.down_rate(i) == 0.0).unwrap_or(n);
    if hi <= lo {
        return Err(Error::Trapped(hi));
    }
    Ok((lo, hi))
}

/// Absorption probability of `N` for the `(m, m)` rule from `i`, by the
/// binomial-coefficient closed form
/// `sum_{k<i} C(N-1,k)^(m-1) / sum_{k<N} C(N-1,k)^(m-1)`.
pub fn hitting_probability_mm_closed_form(n: usize, m: u32, i: usize) -> Result<f64> {
    log_hitting_probability_mm_closed_form(n, m, i).map(f64::exp)
}

/// Natural log of [`hitting_probability_mm_closed_form`].
pub fn log_hitting_probability_mm_closed_form(n: usize, m: u32, i: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::Domain(format!("closed form needs m >= 2, got {m}")));
    }
    if n < 1 || i > n {
        return Err(Error::Domain(format!("state {i} outside 0..={n}")));
    }
    let power = f64::from(m - 1);
    let terms: Vec<f64> = (0..n as u64)
        .map(|k| power * ln_binomial(n as u64 - 1, k))
        .collect();
    Ok(log_sum_exp(&terms[..i]) - log_sum_exp(&terms))
}

/// Expected times to absorption and to `alpha`-proximity of consensus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectedTimes {
    n: usize,
    alpha: f64,
    t0: Vec<f64>,
    t_alpha: Vec<f64>,
}

impl ExpectedTimes {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Expected time to hit `{0, N}` from each state.
    pub fn t0(&self) -> &[f64] {
        &self.t0
    }

    /// Expected time to hit `{i <= floor(alpha N)} ∪ {i >= ceil((1-alpha) N)}`.
    pub fn t_alpha(&self) -> &[f64] {
        &self.t_alpha
    }
}

/// Index bounds of the `alpha`-proximity set: `X <= lower` or `X >= upper`.
pub fn proximity_bounds(n: usize, alpha: f64) -> (usize, usize) {
    let nf = n as f64;
    let lower = (alpha * nf).floor() as usize;
    let upper = ((1.0 - alpha) * nf).ceil() as usize;
    (lower.min(n), upper.min(n))
}

/// Expected absorption times (`t0`) and `alpha`-proximity times.
pub fn expected_times(chain: &impl BirthDeath, alpha: f64) -> Result<ExpectedTimes> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(Error::Domain(format!("alpha {alpha} outside [0, 1/2)")));
    }
    let n = chain.size();
    let t0 = first_passage_times(chain, 0, n)?;
    let (lower, upper) = proximity_bounds(n, alpha);
    let t_alpha = first_passage_times(chain, lower, upper)?;
    Ok(ExpectedTimes { n, alpha, t0, t_alpha })
}

/// Expected time to reach `{i <= lower} ∪ {i >= upper}` from every state.
///
/// Solves `t[i] = hold[i] + p_up[i] t[i+1] + p_down[i] t[i-1]` on the open
/// interval with zero boundary values, where `hold = 1/(up + down)`.
pub fn first_passage_times(chain: &impl BirthDeath, lower: usize, upper: usize) -> Result<Vec<f64>> {
    let n = chain.size();
    let mut t = vec![0.0; n + 1];
    if upper <= lower + 1 {
        return Ok(t);
    }
    let first = lower + 1;
    let len = upper - first;
    // Row k (state first + k): -p_down t[i-1] + t[i] - p_up t[i+1] = hold.
    // The sweep carries e = 1 - c' instead of c' so the pivot
    // 1 - p_down c'_prev = p_up + p_down e_prev never cancels, even when the
    // chain is pulled towards the interior and the times are astronomically large.
    let mut c_prime = vec![0.0; len];
    let mut d_prime = vec![0.0; len];
    let (mut e_prev, mut d_prev) = (1.0, 0.0);
    for k in 0..len {
        let i = first + k;
        let total = chain.total_rate(i);
        if !(total > 0.0) {
            return Err(Error::Trapped(i));
        }
        let hold = 1.0 / total;
        let (p_up, p_down) = (chain.up_rate(i) * hold, chain.down_rate(i) * hold);
        let denom = p_up + p_down * e_prev;
        if !(denom > 0.0) {
            return Err(Error::Trapped(i));
        }
        let last = k + 1 == len;
        c_prime[k] = if last { 0.0 } else { p_up / denom };
        let d_coef = if k > 0 { p_down } else { 0.0 };
        d_prime[k] = (hold + d_coef * d_prev) / denom;
        e_prev = if last { 1.0 } else { p_down * e_prev / denom };
        d_prev = d_prime[k];
    }
    t[first + len - 1] = d_prime[len - 1];
    for k in (0..len - 1).rev() {
        t[first + k] = d_prime[k] + c_prime[k] * t[first + k + 1];
    }
    Ok(t)
}

/// Hitting probabilities and expected times together.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub hitting: HittingProbabilities,
    pub times: ExpectedTimes,
}

impl SolveResult {
    pub fn population(&self) -> usize {
        self.hitting.n
    }
}

pub fn solve(chain: &impl BirthDeath, alpha: f64) -> Result<SolveResult> {
    Ok(SolveResult {
        hitting: hitting_probabilities(chain)?,
        times: expected_times(chain, alpha)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_chain, RateTable};
    use crate::rule::{PollingRule, RuleDistribution, SamplingMode};

    fn chain(n: usize, m: u32, d: u32) -> crate::chain::ChainModel {
        build_chain(
            n,
            RuleDistribution::single(PollingRule::new(m, d).unwrap()),
            SamplingMode::WithReplacement,
        )
        .unwrap()
    }

    #[test]
    fn voter_is_linear() {
        let hp = hitting_probabilities(&chain(20, 1, 1)).unwrap();
        for (i, h) in hp.h().iter().enumerate() {
            assert!((h - i as f64 / 20.0).abs() < 1e-14);
        }
        assert!((hp.interpolate(0.25).unwrap() - 0.25).abs() < 1e-14);
        assert!((hp.interpolate(0.2625).unwrap() - 0.2625).abs() < 1e-14);
    }

    #[test]
    fn pair_rule_n4() {
        let hp = hitting_probabilities(&chain(4, 2, 2)).unwrap();
        assert!((hp.h()[1] - 0.125).abs() < 1e-15);
        assert!((hp.h()[2] - 0.5).abs() < 1e-15);
        assert_eq!(hp.h()[0], 0.0);
        assert_eq!(hp.h()[4], 1.0);
        assert_eq!(hp.log_resistor()[0], 0.0);
    }

    #[test]
    fn closed_form_small() {
        assert!((hitting_probability_mm_closed_form(4, 2, 1).unwrap() - 0.125).abs() < 1e-14);
        assert!((hitting_probability_mm_closed_form(4, 2, 2).unwrap() - 0.5).abs() < 1e-14);
        assert_eq!(hitting_probability_mm_closed_form(4, 2, 0).unwrap(), 0.0);
        assert!(hitting_probability_mm_closed_form(4, 1, 2).is_err());
    }

    #[test]
    fn interpolation_domain() {
        let hp = hitting_probabilities(&chain(10, 2, 2)).unwrap();
        assert!(hp.interpolate(-0.1).is_err());
        assert!(hp.interpolate(1.1).is_err());
        assert_eq!(hp.interpolate(0.0).unwrap(), 0.0);
        assert_eq!(hp.interpolate(1.0).unwrap(), 1.0);
        assert_eq!(hp.interpolate(0.3).unwrap(), hp.h()[3]);
        let mid = hp.interpolate(0.35).unwrap();
        assert!((mid - 0.5 * (hp.h()[3] + hp.h()[4])).abs() < 1e-15);
        let lmid = hp.interpolate_log(0.35).unwrap();
        assert!((lmid - mid.ln()).abs() < 1e-12);
    }

    #[test]
    fn two_state_voter_time() {
        // From state 1 with N = 2 both rates are 1/2, so the holding time has mean 1.
        let t = expected_times(&chain(2, 1, 1), 0.0).unwrap();
        assert!((t.t0()[1] - 1.0).abs() < 1e-15);
        assert_eq!(t.t0()[0], 0.0);
        assert_eq!(t.t0()[2], 0.0);
    }

    #[test]
    fn log_h_survives_underflow() {
        let hp = hitting_probabilities(&chain(3000, 5, 5)).unwrap();
        assert_eq!(hp.h()[1], 0.0);
        assert!(hp.log_h()[1].is_finite() && hp.log_h()[1] < -745.0);
    }

    #[test]
    fn cut_network() {
        // State 1 cannot move up, state 3 cannot move down.
        let up = vec![0.0, 0.0, 1.0, 2.0, 0.0];
        let down = vec![0.0, 1.0, 3.0, 0.0, 0.0];
        let rt = RateTable::new(up, down).unwrap();
        let hp = hitting_probabilities(&rt).unwrap();
        assert_eq!(hp.h()[1], 0.0);
        assert!((hp.h()[2] - 0.25).abs() < 1e-15);
        assert_eq!(hp.h()[3], 1.0);
        let t = expected_times(&rt, 0.0).unwrap();
        // t1 = 1, t3 = 1/2, t2 = 1/4 + 1/4 t3 + 3/4 t1
        assert!((t.t0()[2] - (0.25 + 0.125 + 0.75)).abs() < 1e-15);
    }

    #[test]
    fn trapped_is_an_error() {
        let up = vec![0.0, 1.0, 0.0, 0.0];
        let down = vec![0.0, 0.0, 1.0, 0.0];
        let rt = RateTable::new(up, down).unwrap();
        assert!(matches!(hitting_probabilities(&rt), Err(Error::Trapped(_))));
        let up = vec![0.0, 0.0, 0.0];
        let down = vec![0.0, 0.0, 0.0];
        let rt = RateTable::new(up, down).unwrap();
        assert!(expected_times(&rt, 0.0).is_err());
    }

    #[test]
    fn alpha_domain() {
        assert!(expected_times(&chain(10, 2, 2), 0.5).is_err());
        assert!(expected_times(&chain(10, 2, 2), -0.1).is_err());
    }

    #[test]
    fn proximity_set() {
        assert_eq!(proximity_bounds(100, 0.1), (10, 90));
        assert_eq!(proximity_bounds(10, 0.0), (0, 10));
        assert_eq!(proximity_bounds(7, 0.2), (1, 6));
    }

    #[test]
    fn alpha_times_bounded_by_absorption() {
        let t = expected_times(&chain(200, 3, 2), 0.1).unwrap();
        for i in 0..=200 {
            assert!(t.t_alpha()[i] <= t.t0()[i] + 1e-12);
        }
        assert!(t.t_alpha()[5] == 0.0 && t.t0()[5] > 0.0);
    }
}
