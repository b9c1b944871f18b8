//! Exact analysis and simulation of `(m, d)` polling consensus on the complete graph.
//!
//! Every node holds a binary state. At rate one, a node polls `m` peers and adopts
//! the opposite state if at least `d` of them disagree with it. The number of
//! state-1 nodes is a birth–death chain; this crate builds its rates, solves for
//! absorption probabilities and times, evaluates the large-`N` error exponents,
//! simulates the process, and checks the dominating chain behind the
//! logarithmic consensus-time bound.

pub mod asymptotics;
pub mod chain;
pub mod dominating;
pub mod error;
pub mod numeric;
pub mod quadrature;
pub mod rule;
pub mod sim;
pub mod solver;
pub mod stats;
pub mod tails;

pub use chain::{build_chain, fold, BirthDeath, ChainModel, RateTable};
pub use error::{Error, Result};
pub use rule::{PollingRule, RuleDistribution, RuleRecord, SamplingMode};
pub use sim::{Consensus, Engine, Estimate, SimConfig, SimOutcome, Summary};
pub use solver::{expected_times, hitting_probabilities, solve, ExpectedTimes, HittingProbabilities, SolveResult};
