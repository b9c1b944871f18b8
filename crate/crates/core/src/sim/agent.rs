//! Node-level simulation: every update polls actual peers from the state vector.

use rand::Rng;
use rand_distr::Exp1;

use super::{Consensus, RuleAssignment, SimConfig, SimOutcome};
use crate::rule::{PollingRule, SamplingMode};
use crate::solver::proximity_bounds;

/// Samples `m` distinct indices from `0..pool` (Floyd's algorithm) into `out`.
fn floyd_sample<R: Rng + ?Sized>(rng: &mut R, pool: usize, m: usize, out: &mut Vec<usize>) {
    out.clear();
    for j in pool - m..pool {
        let t = rng.random_range(0..=j);
        if out.contains(&t) {
            out.push(j);
        } else {
            out.push(t);
        }
    }
}

/// Number of state-1 nodes among the `m` peers polled by `node`.
fn poll<R: Rng + ?Sized>(
    rng: &mut R,
    state: &[u8],
    node: usize,
    m: usize,
    mode: SamplingMode,
    scratch: &mut Vec<usize>,
) -> u32 {
    let n = state.len();
    match mode {
        SamplingMode::WithReplacement => (0..m)
            .map(|_| u32::from(state[rng.random_range(0..n)]))
            .sum(),
        SamplingMode::WithoutReplacement { exclude_self } => {
            let pool = if exclude_self { n - 1 } else { n };
            floyd_sample(rng, pool, m, scratch);
            scratch
                .iter()
                .map(|&j| {
                    let j = if exclude_self && j >= node { j + 1 } else { j };
                    u32::from(state[j])
                })
                .sum()
        }
    }
}

pub(super) fn simulate<R: Rng + ?Sized>(config: &SimConfig, replica: u64, rng: &mut R) -> SimOutcome {
    let n = config.population;
    let mut state = vec![0u8; n];
    state[..config.initial_ones].fill(1);
    let mut ones = config.initial_ones;

    let fixed: Vec<PollingRule> = match config.rule_assignment {
        RuleAssignment::PerNode => (0..n).map(|_| config.rules.pick(rng.random())).collect(),
        RuleAssignment::PerUpdate => Vec::new(),
    };
    let single = config.rules.as_single();
    let (lower, upper) = proximity_bounds(n, config.alpha);
    let watched = |k: usize| k <= lower || k >= upper;
    let max_time = config.effective_max_time();
    let mut scratch = Vec::with_capacity(config.rules.max_poll() as usize);
    let mut trajectory = Vec::new();
    if config.trajectory_stride.is_some() {
        trajectory.push((0.0, ones));
    }

    let mut time = 0.0;
    let mut events = 0u64;
    let mut alpha_exit = watched(ones).then_some(0.0);
    let mut censored = false;
    while ones > 0 && ones < n {
        if events >= config.max_events {
            censored = true;
            break;
        }
        let dt = rng.sample::<f64, _>(Exp1) / n as f64;
        if time + dt > max_time {
            time = max_time;
            censored = true;
            break;
        }
        time += dt;
        events += 1;

        let node = rng.random_range(0..n);
        let rule = match (config.rule_assignment, single) {
            (RuleAssignment::PerNode, _) => fixed[node],
            (RuleAssignment::PerUpdate, Some(r)) => r,
            (RuleAssignment::PerUpdate, None) => config.rules.pick(rng.random()),
        };
        let m = rule.m() as usize;
        let seen_ones = poll(rng, &state, node, m, config.mode, &mut scratch);
        let disagree = if state[node] == 1 {
            rule.m() - seen_ones
        } else {
            seen_ones
        };
        if disagree >= rule.d() {
            if state[node] == 1 {
                state[node] = 0;
                ones -= 1;
            } else {
                state[node] = 1;
                ones += 1;
            }
            if alpha_exit.is_none() && watched(ones) {
                alpha_exit = Some(time);
            }
        }
        if let Some(stride) = config.trajectory_stride {
            if events % stride == 0 {
                trajectory.push((time, ones));
            }
        }
    }

    let absorbed = if censored {
        None
    } else if ones == 0 {
        Some(Consensus::Zero)
    } else {
        Some(Consensus::One)
    };
    SimOutcome {
        replica,
        absorbed,
        absorption_time: absorbed.map(|_| time),
        alpha_exit_time: alpha_exit,
        events,
        trajectory,
    }
}
