//! Merges the optional config file with command-line flags into one resolved,
//! validated experiment description.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use polvote_core::sim::Engine;
use polvote_core::{Error, PollingRule, RuleDistribution, RuleRecord, SamplingMode};
use serde::{Deserialize, Serialize};

use crate::args::{CommandKind, CommonArgs, EngineArg, Format};

/// Keys accepted in a TOML config file; names match the long flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub command: Option<CommandKind>,
    pub n: Option<usize>,
    pub n_list: Option<Vec<usize>>,
    pub rule: Option<Vec<String>>,
    pub rules: Option<Vec<RuleRecord>>,
    pub mode: Option<String>,
    pub alpha: Option<f64>,
    pub initial_frac: Option<f64>,
    pub initial_ones: Option<usize>,
    pub replicas: Option<u64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub threads: Option<usize>,
    pub mixture_p: Option<Vec<f64>>,
    pub epsilon: Option<f64>,
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub points: Option<usize>,
    pub engine: Option<EngineArg>,
    pub max_time: Option<f64>,
    pub per_node_rules: Option<bool>,
    pub summary: Option<PathBuf>,
}

/// The fully resolved experiment. Everything serialised here is embedded in
/// each output file; paths and thread counts are not, so outputs stay
/// byte-identical across locations and worker counts.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub command: CommandKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub n_list: Vec<usize>,
    pub rules: RuleDistribution,
    pub mode: SamplingMode,
    pub alpha: f64,
    pub initial_frac: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_ones: Option<usize>,
    pub replicas: u64,
    pub seed: u64,
    pub format: Format,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub mixture_p: Vec<f64>,
    pub epsilon: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
    pub engine: Engine,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_time: Option<f64>,
    pub per_node_rules: bool,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub summary: Option<PathBuf>,
    #[serde(skip)]
    pub threads: Option<usize>,
}

fn invalid(field: &'static str, reason: impl Into<String>) -> anyhow::Error {
    Error::InvalidConfig {
        field,
        reason: reason.into(),
    }
    .into()
}

/// Parses `m:d` or `m:d:weight`.
pub fn parse_rule_arg(s: &str) -> Result<RuleRecord> {
    let parts: Vec<&str> = s.trim().split(':').collect();
    let (rule, weight) = match parts.as_slice() {
        [m, d] => (format!("{m}:{d}"), None),
        [m, d, w] => {
            let w: f64 = w
                .trim()
                .parse()
                .map_err(|_| invalid("rule", format!("bad weight in `{s}`")))?;
            (format!("{m}:{d}"), Some(w))
        }
        _ => return Err(invalid("rule", format!("`{s}` is not m:d or m:d:weight"))),
    };
    let rule: PollingRule = rule.parse().map_err(|e: Error| invalid("rule", e.to_string()))?;
    Ok(RuleRecord {
        m: rule.m(),
        d: rule.d(),
        weight,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RulesFile {
    rules: Vec<RuleRecord>,
}

fn read_rules_file(path: &Path) -> Result<Vec<RuleRecord>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| invalid("rules", e.to_string()))
    } else {
        toml::from_str::<RulesFile>(&text)
            .map(|f| f.rules)
            .map_err(|e| invalid("rules", e.to_string()))
    }
}

pub fn read_config_file(path: &Path) -> Result<FileConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).map_err(|e| invalid("config", e.to_string()))
}

fn resolve_rules(args: &CommonArgs, file: &FileConfig) -> Result<RuleDistribution> {
    let records: Vec<RuleRecord> = if !args.rules.is_empty() {
        args.rules.iter().map(|s| parse_rule_arg(s)).collect::<Result<_>>()?
    } else if let Some(path) = &args.rules_file {
        read_rules_file(path)?
    } else if let Some(strings) = &file.rule {
        strings.iter().map(|s| parse_rule_arg(s)).collect::<Result<_>>()?
    } else if let Some(records) = &file.rules {
        records.clone()
    } else {
        vec![RuleRecord {
            m: 2,
            d: 2,
            weight: None,
        }]
    };
    RuleDistribution::from_records(&records).map_err(|e| invalid("rule", e.to_string()))
}

/// Combines flags (first), the config file, and defaults; then validates.
pub fn resolve(kind: CommandKind, args: &CommonArgs) -> Result<ExperimentConfig> {
    let file = match &args.config {
        Some(path) => read_config_file(path)?,
        None => FileConfig::default(),
    };
    if let Some(c) = file.command {
        if c != kind {
            return Err(invalid(
                "command",
                format!("config file is for `{c:?}`, but `{kind:?}` was requested"),
            ));
        }
    }
    let mode = match args.mode.as_ref().or(file.mode.as_ref()) {
        Some(s) => s.parse().map_err(|e: Error| invalid("mode", e.to_string()))?,
        None => SamplingMode::default(),
    };
    let default_frac = if kind == CommandKind::Dominate { 0.3 } else { 1.0 / 3.0 };
    let engine = match args.engine.or(file.engine).unwrap_or(EngineArg::Aggregate) {
        EngineArg::Aggregate => Engine::Aggregate,
        EngineArg::Agent => Engine::AgentLevel,
    };
    let rules = resolve_rules(args, &file)?;
    let config = ExperimentConfig {
        command: kind,
        n: args.n.or(file.n),
        n_list: args.n_list.clone().or(file.n_list).unwrap_or_default(),
        rules,
        mode,
        alpha: args.alpha.or(file.alpha).unwrap_or(0.1),
        initial_frac: args.initial_frac.or(file.initial_frac).unwrap_or(default_frac),
        initial_ones: args.initial_ones.or(file.initial_ones),
        replicas: args.replicas.or(file.replicas).unwrap_or(1000),
        seed: args.seed.or(file.seed).unwrap_or(0),
        format: args.format.or(file.format).unwrap_or(Format::Csv),
        mixture_p: args.mixture_p.clone().or(file.mixture_p).unwrap_or_default(),
        epsilon: args.epsilon.or(file.epsilon).unwrap_or(0.2),
        x_min: args.x_min.or(file.x_min).unwrap_or(0.01),
        x_max: args.x_max.or(file.x_max).unwrap_or(0.5),
        points: args.points.or(file.points).unwrap_or(50),
        engine,
        max_time: args.max_time.or(file.max_time),
        per_node_rules: args.per_node_rules || file.per_node_rules.unwrap_or(false),
        out: args.out.clone().or(file.out),
        summary: args.summary.clone().or(file.summary),
        threads: args.threads.or(file.threads),
    };
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    pub fn require_n(&self) -> Result<usize> {
        let n = self.n.ok_or_else(|| invalid("n", "required for this command"))?;
        if n < 2 {
            return Err(invalid("n", format!("{n} is below 2")));
        }
        Ok(n)
    }

    /// Initial count: the explicit value, else `floor(initial_frac * n)`.
    pub fn initial_ones(&self, n: usize) -> Result<usize> {
        let ones = match self.initial_ones {
            Some(k) => k,
            // The nudge keeps exact products such as (1/3) * 300 from flooring down.
            None => (self.initial_frac * n as f64 + 1e-9).floor() as usize,
        };
        if ones > n {
            return Err(invalid("initial_ones", format!("{ones} exceeds N = {n}")));
        }
        Ok(ones)
    }

    pub fn single_rule(&self) -> Result<PollingRule> {
        self.rules
            .as_single()
            .ok_or_else(|| invalid("rule", "this command needs a single rule"))
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.alpha) {
            return Err(invalid("alpha", format!("{} outside [0, 1/2)", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.initial_frac) {
            return Err(invalid(
                "initial_frac",
                format!("{} outside [0, 1]", self.initial_frac),
            ));
        }
        if self.replicas == 0 {
            return Err(invalid("replicas", "must be at least 1"));
        }
        if self.threads == Some(0) {
            return Err(invalid("threads", "must be at least 1"));
        }
        match self.command {
            CommandKind::Exact | CommandKind::Simulate | CommandKind::Dominate => {
                self.require_n()?;
            }
            CommandKind::Sweep => {
                if self.n_list.is_empty() {
                    return Err(invalid("n_list", "must not be empty"));
                }
                if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(invalid("n_list", "must be strictly ascending"));
                }
                if self.n_list[0] < 2 {
                    return Err(invalid("n_list", "population sizes must be at least 2"));
                }
            }
            CommandKind::Exponent => {
                if let Some(p) = self.mixture_p.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                    return Err(invalid("mixture_p", format!("{p} outside [0, 1]")));
                }
                if self.mixture_p.is_empty() && !self.rules.is_strict_majority_as() {
                    return Err(invalid("rule", "exponent needs strict-majority rules"));
                }
                if !(self.x_min > 0.0 && self.x_min <= self.x_max && self.x_max <= 0.5) {
                    return Err(invalid(
                        "x_min",
                        format!("need 0 < x_min <= x_max <= 1/2, got {} and {}", self.x_min, self.x_max),
                    ));
                }
                if self.points == 0 || (self.points == 1 && self.x_min < self.x_max) {
                    return Err(invalid("points", "need at least 2 points for a range"));
                }
            }
        }
        if self.command == CommandKind::Dominate && !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid("epsilon", format!("{} outside (0, 1)", self.epsilon)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_args() {
        let r = parse_rule_arg("3:2").unwrap();
        assert_eq!((r.m, r.d, r.weight), (3, 2, None));
        let r = parse_rule_arg("1:1:0.25").unwrap();
        assert_eq!(r.weight, Some(0.25));
        assert!(parse_rule_arg("2").is_err());
        assert!(parse_rule_arg("2:3").is_err());
        assert!(parse_rule_arg("2:2:x").is_err());
    }

    #[test]
    fn flags_override_defaults() {
        let args = CommonArgs {
            n: Some(10),
            alpha: Some(0.2),
            ..Default::default()
        };
        let c = resolve(CommandKind::Exact, &args).unwrap();
        assert_eq!(c.n, Some(10));
        assert_eq!(c.alpha, 0.2);
        assert_eq!(c.rules, RuleDistribution::single(PollingRule::new(2, 2).unwrap()));
        assert_eq!(c.initial_ones(300).unwrap(), 100);
    }

    fn field_of(e: anyhow::Error) -> &'static str {
        match e.downcast::<Error>() {
            Ok(Error::InvalidConfig { field, .. }) => field,
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn errors_name_fields() {
        let sweep = CommonArgs {
            n_list: Some(vec![200, 100]),
            ..Default::default()
        };
        assert_eq!(field_of(resolve(CommandKind::Sweep, &sweep).unwrap_err()), "n_list");
        assert_eq!(
            field_of(resolve(CommandKind::Exact, &CommonArgs::default()).unwrap_err()),
            "n"
        );
        let sim = CommonArgs {
            n: Some(10),
            replicas: Some(0),
            ..Default::default()
        };
        assert_eq!(field_of(resolve(CommandKind::Simulate, &sim).unwrap_err()), "replicas");
        let exp = CommonArgs {
            rules: vec!["4:2".into()],
            ..Default::default()
        };
        assert_eq!(field_of(resolve(CommandKind::Exponent, &exp).unwrap_err()), "rule");
        let mixed = CommonArgs {
            n: Some(10),
            rules: vec!["1:1:0.5".into(), "2:2".into()],
            ..Default::default()
        };
        assert_eq!(field_of(resolve(CommandKind::Exact, &mixed).unwrap_err()), "rule");
    }
}
