//! Replica summaries with confidence intervals.

use serde::Serialize;

use super::{Consensus, SimOutcome};
use crate::error::{Error, Result};
use crate::stats::{mean_stderr, wilson_interval, Z95};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub point: f64,
    pub stderr: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub n_samples: u64,
}

impl Estimate {
    /// Proportion with binomial standard error and a Wilson interval.
    pub fn proportion(successes: u64, n: u64) -> Self {
        let p = successes as f64 / n as f64;
        let (lo, hi) = wilson_interval(successes, n, Z95);
        Self {
            point: p,
            stderr: (p * (1.0 - p) / n as f64).sqrt(),
            ci95_low: lo,
            ci95_high: hi,
            n_samples: n,
        }
    }

    /// Sample mean with a normal-theory interval.
    pub fn mean(values: &[f64]) -> Self {
        let (m, se) = mean_stderr(values);
        Self {
            point: m,
            stderr: se,
            ci95_low: m - Z95 * se,
            ci95_high: m + Z95 * se,
            n_samples: values.len() as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub replicas: u64,
    pub completed: u64,
    pub censored: u64,
    /// Fraction of completed replicas absorbed at N.
    pub absorbed_one: Estimate,
    /// Fraction absorbed at the initial minority value; absent for a tied start.
    pub wrong_consensus: Option<Estimate>,
    pub absorption_time: Estimate,
    /// Over replicas that reached the proximity set, censored or not.
    pub alpha_exit_time: Option<Estimate>,
}

/// Summarises outcomes of runs started from `initial_ones` out of `population`.
pub fn estimate(outcomes: &[SimOutcome], population: usize, initial_ones: usize) -> Result<Summary> {
    let done: Vec<&SimOutcome> = outcomes.iter().filter(|o| !o.is_censored()).collect();
    let completed = done.len() as u64;
    let censored = outcomes.len() as u64 - completed;
    if completed == 0 && censored > 0 {
        return Err(Error::NoSamples(format!("all {censored} replicas censored")));
    }
    if completed < 2 {
        return Err(Error::NoSamples(format!(
            "{completed} completed replicas, need at least 2"
        )));
    }
    let ones = done
        .iter()
        .filter(|o| o.absorbed == Some(Consensus::One))
        .count() as u64;
    let wrong = match (2 * initial_ones).cmp(&population) {
        std::cmp::Ordering::Less => Some(ones),
        std::cmp::Ordering::Greater => Some(completed - ones),
        std::cmp::Ordering::Equal => None,
    };
    let times: Vec<f64> = done.iter().filter_map(|o| o.absorption_time).collect();
    let exits: Vec<f64> = outcomes.iter().filter_map(|o| o.alpha_exit_time).collect();
    Ok(Summary {
        replicas: outcomes.len() as u64,
        completed,
        censored,
        absorbed_one: Estimate::proportion(ones, completed),
        wrong_consensus: wrong.map(|k| Estimate::proportion(k, completed)),
        absorption_time: Estimate::mean(&times),
        alpha_exit_time: (exits.len() >= 2).then(|| Estimate::mean(&exits)),
    })
}
