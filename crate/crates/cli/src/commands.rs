//! The five subcommands. Each builds a table (and, where the table is not the
//! whole story, a JSON value) from a resolved config.

use anyhow::Result;
use polvote_core::asymptotics::{exponent_integral, kl_bernoulli_half, log_mm_error_bound, mixture_exponent};
use polvote_core::dominating::{check_domination, DominationConfig};
use polvote_core::sim::{estimate, run_replicas, Consensus, RuleAssignment, SimConfig};
use polvote_core::{build_chain, expected_times, hitting_probabilities, RuleDistribution};
use serde_json::Value;

use crate::output::Table;
use crate::settings::ExperimentConfig;

/// What a command produced: always a table, plus the body of its JSON form.
pub struct Output {
    pub table: Table,
    pub body: Body,
}

pub enum Body {
    /// The JSON form is the table rows.
    Rows,
    /// A richer JSON value under the given key.
    Value(&'static str, Value),
    /// No JSON form could be produced.
    Unavailable(anyhow::Error),
}

impl From<Table> for Output {
    fn from(table: Table) -> Self {
        Self {
            table,
            body: Body::Rows,
        }
    }
}

pub fn run_exact(c: &ExperimentConfig) -> Result<Output> {
    let n = c.require_n()?;
    let chain = build_chain(n, c.rules.clone(), c.mode)?;
    let hp = hitting_probabilities(&chain)?;
    let times = expected_times(&chain, c.alpha)?;
    let mut table = Table::new(vec!["i", "x", "h", "t0", "t_alpha", "log_h"]);
    for i in 0..=n {
        table.push(vec![
            i.into(),
            (i as f64 / n as f64).into(),
            hp.h()[i].into(),
            times.t0()[i].into(),
            times.t_alpha()[i].into(),
            hp.log_h()[i].into(),
        ]);
    }
    Ok(table.into())
}

/// `ln` of the `(m, m)` bound with `c = 1`, when the rules are a single `(m, m)`.
fn log_bound_c1(rules: &RuleDistribution, n: usize, alpha: f64) -> Option<f64> {
    let rule = rules.as_single()?;
    (rule.m() == rule.d() && rule.m() >= 2 && alpha > 0.0 && alpha < 0.5)
        .then(|| log_mm_error_bound(n, rule.m(), alpha, 1.0).ok())
        .flatten()
}

pub fn run_sweep(c: &ExperimentConfig) -> Result<Output> {
    let mut table = Table::new(vec![
        "n", "i", "h", "log_h", "t0", "t_alpha", "log_bound_c1",
    ]);
    for &n in &c.n_list {
        let chain = build_chain(n, c.rules.clone(), c.mode)?;
        let hp = hitting_probabilities(&chain)?;
        let times = expected_times(&chain, c.alpha)?;
        let i = c.initial_ones(n)?;
        table.push(vec![
            n.into(),
            i.into(),
            hp.h()[i].into(),
            hp.log_h()[i].into(),
            times.t0()[i].into(),
            times.t_alpha()[i].into(),
            log_bound_c1(&c.rules, n, c.initial_frac).into(),
        ]);
    }
    Ok(table.into())
}

fn grid(c: &ExperimentConfig) -> Vec<f64> {
    if c.points == 1 {
        return vec![c.x_min];
    }
    let step = (c.x_max - c.x_min) / (c.points - 1) as f64;
    (0..c.points)
        .map(|k| if k + 1 == c.points { c.x_max } else { c.x_min + k as f64 * step })
        .collect()
}

pub fn run_exponent(c: &ExperimentConfig) -> Result<Output> {
    if !c.mixture_p.is_empty() {
        let mut table = Table::new(vec!["p", "x", "exponent", "integral"]);
        for &p in &c.mixture_p {
            let rules = RuleDistribution::voter_pair_mixture(p)?;
            for x in grid(c) {
                let integral = exponent_integral(x, &rules)?;
                // The closed form divides by 1 - p; the pure voter rule has exponent 0.
                let closed = if p < 1.0 { mixture_exponent(x, p)? } else { integral };
                table.push(vec![p.into(), x.into(), closed.into(), integral.into()]);
            }
        }
        return Ok(table.into());
    }
    let mm = c.rules.as_single().filter(|r| r.m() == r.d());
    let mut table = Table::new(vec!["alpha", "exponent", "closed_form"]);
    for a in grid(c) {
        let closed = match mm {
            Some(r) => Some(f64::from(r.m() - 1) * kl_bernoulli_half(a)?),
            None => None,
        };
        table.push(vec![a.into(), exponent_integral(a, &c.rules)?.into(), closed.into()]);
    }
    Ok(table.into())
}

pub fn sim_config(c: &ExperimentConfig) -> Result<SimConfig> {
    let n = c.require_n()?;
    let mut sim = SimConfig::new(n, c.rules.clone(), c.initial_ones(n)?);
    sim.mode = c.mode;
    sim.alpha = c.alpha;
    sim.replicas = c.replicas;
    sim.seed = c.seed;
    sim.engine = c.engine;
    sim.max_time = c.max_time;
    if c.per_node_rules {
        sim.rule_assignment = RuleAssignment::PerNode;
    }
    Ok(sim)
}

pub fn run_simulate(c: &ExperimentConfig) -> Result<Output> {
    let sim = sim_config(c)?;
    let outcomes = run_replicas(&sim, c.threads)?;
    let mut table = Table::new(vec![
        "replica", "absorbed", "absorption_time", "alpha_exit_time", "events",
    ]);
    for o in &outcomes {
        let absorbed = o.absorbed.map(|v| match v {
            Consensus::Zero => 0u64,
            Consensus::One => 1,
        });
        table.push(vec![
            o.replica.into(),
            absorbed.into(),
            o.absorption_time.into(),
            o.alpha_exit_time.into(),
            o.events.into(),
        ]);
    }
    // A run with too few completed replicas still has a replica table.
    let body = match estimate(&outcomes, sim.population, sim.initial_ones) {
        Ok(s) => Body::Value("summary", serde_json::to_value(s)?),
        Err(e) => Body::Unavailable(e.into()),
    };
    Ok(Output { table, body })
}

pub fn run_dominate(c: &ExperimentConfig) -> Result<Output> {
    let n = c.require_n()?;
    let rule = c.single_rule()?;
    let cfg = DominationConfig {
        n,
        epsilon: c.epsilon,
        rule,
        start: c.initial_ones(n)?,
        level: (c.alpha * n as f64).floor() as usize,
        replicas: c.replicas,
        seed: c.seed,
    };
    let r = check_domination(&cfg, c.threads)?;
    let mut table = Table::new(vec![
        "n",
        "epsilon",
        "m",
        "d",
        "start",
        "level",
        "beta",
        "c1",
        "c2",
        "tau0_bound",
        "grid_holds",
        "mean_x",
        "mean_y",
        "ks_statistic",
        "ks_p_value",
        "level_ks_p_value",
        "dominated",
        "means_ordered",
    ]);
    let cmp = &r.comparison;
    table.push(vec![
        n.into(),
        c.epsilon.into(),
        rule.m().into(),
        rule.d().into(),
        cmp.start.into(),
        cmp.level.into(),
        r.beta.into(),
        r.c1.into(),
        r.c2.into(),
        r.tau0_bound.into(),
        r.grid.holds().into(),
        cmp.absorption_x.point.into(),
        cmp.absorption_y.point.into(),
        cmp.absorption_one_sided.statistic.into(),
        cmp.absorption_one_sided.p_value.into(),
        cmp.level_one_sided.p_value.into(),
        r.dominated.into(),
        r.means_ordered.into(),
    ]);
    Ok(Output {
        table,
        body: Body::Value("report", serde_json::to_value(&r)?),
    })
}
