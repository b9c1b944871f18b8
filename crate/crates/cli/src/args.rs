//! Command-line definitions. Every option is optional here so that a config
//! file can supply it; defaults are applied during resolution.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "polvote", version, about = "Exact and simulated (m,d) polling consensus on the complete graph")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Exact,
    Sweep,
    Exponent,
    Simulate,
    Dominate,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-state absorption probabilities and expected times for one N.
    Exact(CommonArgs),
    /// Wrong-consensus probability and consensus time across a list of N.
    Sweep(CommonArgs),
    /// Error-exponent curves.
    Exponent(CommonArgs),
    /// Monte Carlo replicas of the consensus process.
    Simulate(CommonArgs),
    /// Dominating-chain checks behind the logarithmic time bound.
    Dominate(CommonArgs),
}

impl Command {
    pub fn kind(&self) -> CommandKind {
        match self {
            Self::Exact(_) => CommandKind::Exact,
            Self::Sweep(_) => CommandKind::Sweep,
            Self::Exponent(_) => CommandKind::Exponent,
            Self::Simulate(_) => CommandKind::Simulate,
            Self::Dominate(_) => CommandKind::Dominate,
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Self::Exact(a) | Self::Sweep(a) | Self::Exponent(a) | Self::Simulate(a) | Self::Dominate(a) => a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineArg {
    Aggregate,
    Agent,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML file with any of the options below; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Population size.
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated ascending population sizes.
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    /// Rule `m:d`, or `m:d:weight` for a mixture; repeatable.
    #[arg(long = "rule")]
    pub rules: Vec<String>,
    /// File of rule records (`.json` array or TOML `[[rules]]` tables).
    #[arg(long = "rules")]
    pub rules_file: Option<PathBuf>,
    /// Peer sampling: with, without, or without-self.
    #[arg(long)]
    pub mode: Option<String>,
    /// Proximity level for `t_alpha`, exit times and passage checks.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Initial fraction of state-1 nodes (floored to a count).
    #[arg(long)]
    pub initial_frac: Option<f64>,
    /// Initial count of state-1 nodes; overrides `--initial-frac`.
    #[arg(long)]
    pub initial_ones: Option<usize>,
    #[arg(long)]
    pub replicas: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads for replica runs.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Voter-rule probability of the (1,1)/(2,2) mixture; comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub mixture_p: Option<Vec<f64>>,
    /// Band half-width of the dominating chain.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Exponent grid: smallest fraction.
    #[arg(long)]
    pub x_min: Option<f64>,
    /// Exponent grid: largest fraction.
    #[arg(long)]
    pub x_max: Option<f64>,
    /// Exponent grid: number of points.
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long, value_enum)]
    pub engine: Option<EngineArg>,
    /// Simulation time cutoff.
    #[arg(long)]
    pub max_time: Option<f64>,
    /// Experimental: every node keeps one rule for the whole run.
    #[arg(long)]
    pub per_node_rules: bool,
    /// Also write the simulation summary as JSON to this path.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}
