//! Monte Carlo engines for the consensus process.
//!
//! The aggregate engine runs the count chain directly; the agent-level engine
//! keeps the full state vector. Each replica owns a ChaCha8 stream selected by
//! `(seed, replica)`, so results do not depend on scheduling.

mod agent;
mod estimate;
mod jump;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{build_chain, MAX_POPULATION};
use crate::error::{config_err, Error, Result};
use crate::rule::{RuleDistribution, SamplingMode};
use crate::solver::proximity_bounds;

pub use estimate::{estimate, Estimate, Summary};
pub use jump::{JumpTable, Passage, Stops};

/// Default event guard for the agent-level engine.
pub const DEFAULT_MAX_EVENTS: u64 = 1_000_000_000;

/// The RNG for one replica: stream `replica` of the generator seeded by `seed`.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[default]
    Aggregate,
    AgentLevel,
}

/// How rules are attached to nodes in the agent-level engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleAssignment {
    /// A fresh `(m, d)` draw at every update.
    #[default]
    PerUpdate,
    /// Experimental: each node draws its rule once. No exact chain describes this.
    PerNode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub population: usize,
    pub rules: RuleDistribution,
    #[serde(default)]
    pub mode: SamplingMode,
    pub initial_ones: usize,
    #[serde(default)]
    pub alpha: f64,
    pub replicas: u64,
    pub seed: u64,
    #[serde(default)]
    pub engine: Engine,
    /// Time cutoff; `None` means `100 (1 + ln N)`.
    #[serde(default)]
    pub max_time: Option<f64>,
    #[serde(default)]
    pub rule_assignment: RuleAssignment,
    /// Record `(time, ones)` after every k-th event.
    #[serde(default)]
    pub trajectory_stride: Option<u64>,
    #[serde(default = "default_max_events")]
    pub max_events: u64,
}

fn default_max_events() -> u64 {
    DEFAULT_MAX_EVENTS
}

impl SimConfig {
    /// A config with defaults for everything but the chain and the start.
    pub fn new(population: usize, rules: RuleDistribution, initial_ones: usize) -> Self {
        Self {
            population,
            rules,
            mode: SamplingMode::default(),
            initial_ones,
            alpha: 0.0,
            replicas: 1,
            seed: 0,
            engine: Engine::default(),
            max_time: None,
            rule_assignment: RuleAssignment::default(),
            trajectory_stride: None,
            max_events: DEFAULT_MAX_EVENTS,
        }
    }

    pub fn effective_max_time(&self) -> f64 {
        self.max_time
            .unwrap_or_else(|| 100.0 * (1.0 + (self.population as f64).ln()))
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.population;
        if !(2..=MAX_POPULATION).contains(&n) {
            return Err(config_err("n", format!("{n} outside 2..={MAX_POPULATION}")));
        }
        if self.initial_ones > n {
            return Err(config_err(
                "initial_ones",
                format!("{} exceeds N = {n}", self.initial_ones),
            ));
        }
        if self.replicas == 0 {
            return Err(config_err("replicas", "must be at least 1"));
        }
        if !(0.0..0.5).contains(&self.alpha) {
            return Err(config_err("alpha", format!("{} outside [0, 1/2)", self.alpha)));
        }
        if let Some(t) = self.max_time {
            if !(t > 0.0) {
                return Err(config_err("max_time", format!("{t} is not positive")));
            }
        }
        if self.trajectory_stride == Some(0) {
            return Err(config_err("trajectory_stride", "must be at least 1"));
        }
        if self.max_events == 0 {
            return Err(config_err("max_events", "must be at least 1"));
        }
        if let SamplingMode::WithoutReplacement { exclude_self } = self.mode {
            let pool = if exclude_self { n - 1 } else { n };
            if self.rules.max_poll() as usize > pool {
                return Err(config_err(
                    "mode",
                    format!("cannot poll {} distinct peers from {pool}", self.rules.max_poll()),
                ));
            }
        }
        if self.rule_assignment == RuleAssignment::PerNode && self.engine != Engine::AgentLevel {
            return Err(config_err(
                "rule_assignment",
                "per-node rules need the agent-level engine",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Consensus {
    Zero,
    One,
}

/// One replica's result. `absorbed` is `None` only when a cutoff was hit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOutcome {
    pub replica: u64,
    pub absorbed: Option<Consensus>,
    pub absorption_time: Option<f64>,
    pub alpha_exit_time: Option<f64>,
    pub events: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trajectory: Vec<(f64, usize)>,
}

impl SimOutcome {
    pub fn is_censored(&self) -> bool {
        self.absorbed.is_none()
    }
}

/// A validated config with its precomputed jump table.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: SimConfig,
    table: Option<JumpTable>,
}

impl Simulator {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let table = match config.engine {
            Engine::Aggregate => Some(JumpTable::new(&build_chain(
                config.population,
                config.rules.clone(),
                config.mode,
            )?)),
            Engine::AgentLevel => None,
        };
        Ok(Self { config, table })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn run_one(&self, replica: u64) -> SimOutcome {
        let mut rng = replica_rng(self.config.seed, replica);
        match &self.table {
            Some(table) => self.run_aggregate(table, replica, &mut rng),
            None => agent::simulate(&self.config, replica, &mut rng),
        }
    }

    fn run_aggregate(&self, table: &JumpTable, replica: u64, rng: &mut ChaCha8Rng) -> SimOutcome {
        let c = &self.config;
        let n = c.population;
        let stops = Stops {
            lower: 0,
            upper: n,
            watch: proximity_bounds(n, c.alpha),
            max_time: c.effective_max_time(),
            max_events: c.max_events,
        };
        let mut trajectory = Vec::new();
        let sink = c.trajectory_stride.map(|k| (k, &mut trajectory));
        let p = table.run(c.initial_ones, &stops, rng, sink);
        let absorbed = match p.state {
            0 => Some(Consensus::Zero),
            s if s == n => Some(Consensus::One),
            _ => None,
        };
        SimOutcome {
            replica,
            absorbed,
            absorption_time: absorbed.map(|_| p.time),
            alpha_exit_time: p.watch_time,
            events: p.events,
            trajectory,
        }
    }

    /// All replicas, in replica order.
    pub fn run_all(&self, threads: Option<usize>) -> Result<Vec<SimOutcome>> {
        par_replicas(self.config.replicas, threads, |r| self.run_one(r))
    }
}

/// One aggregate-engine replica.
pub fn simulate_aggregate(config: &SimConfig, replica: u64) -> Result<SimOutcome> {
    if config.engine != Engine::Aggregate {
        return Err(config_err("engine", "expected the aggregate engine"));
    }
    Ok(Simulator::new(config.clone())?.run_one(replica))
}

/// One agent-level replica.
pub fn simulate_agent_level(config: &SimConfig, replica: u64) -> Result<SimOutcome> {
    if config.engine != Engine::AgentLevel {
        return Err(config_err("engine", "expected the agent-level engine"));
    }
    Ok(Simulator::new(config.clone())?.run_one(replica))
}

/// Runs every replica of `config`; output order is replica order.
pub fn run_replicas(config: &SimConfig, threads: Option<usize>) -> Result<Vec<SimOutcome>> {
    Simulator::new(config.clone())?.run_all(threads)
}

/// Maps `f` over `0..replicas` in parallel, collecting in index order.
///
/// `threads = None` uses the global rayon pool.
pub fn par_replicas<T, F>(replicas: u64, threads: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    let work = || (0..replicas).into_par_iter().map(&f).collect();
    match threads {
        None => Ok(work()),
        Some(0) => Err(config_err("threads", "must be at least 1")),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map(|pool| pool.install(work))
            .map_err(|e| Error::Domain(format!("thread pool: {e}"))),
    }
}
