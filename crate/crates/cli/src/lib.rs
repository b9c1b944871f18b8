//! Command-line front end: resolves a config, runs one experiment and writes
//! a self-describing CSV or JSON artifact.

pub mod args;
pub mod commands;
pub mod output;
pub mod settings;

use anyhow::Result;

use crate::args::{Cli, CommandKind, Format};
use crate::commands::{Body, Output};
use crate::output::{emit, json_document, write_atomic};
use crate::settings::{resolve, ExperimentConfig};

/// Renders `output` in the requested format.
pub fn render(config: &ExperimentConfig, output: Output) -> Result<String> {
    match config.format {
        Format::Csv => output.table.to_csv(config),
        Format::Json => match output.body {
            Body::Rows => json_document(config, "rows", output.table.to_json_rows()),
            Body::Value(key, value) => json_document(config, key, value),
            Body::Unavailable(e) => Err(e),
        },
    }
}

/// Runs a resolved experiment and writes its artifacts.
pub fn execute(config: &ExperimentConfig) -> Result<()> {
    let output = match config.command {
        CommandKind::Exact => commands::run_exact(config)?,
        CommandKind::Sweep => commands::run_sweep(config)?,
        CommandKind::Exponent => commands::run_exponent(config)?,
        CommandKind::Simulate => commands::run_simulate(config)?,
        CommandKind::Dominate => commands::run_dominate(config)?,
    };
    if let Some(path) = &config.summary {
        match &output.body {
            Body::Value(key, value) => write_atomic(path, &json_document(config, key, value.clone())?)?,
            Body::Unavailable(e) => anyhow::bail!("no summary: {e}"),
            Body::Rows => write_atomic(path, &json_document(config, "rows", output.table.to_json_rows())?)?,
        }
    }
    let text = render(config, output)?;
    emit(config.out.as_deref(), &text)
}

pub fn run(cli: Cli) -> Result<()> {
    let config = resolve(cli.command.kind(), cli.command.args())?;
    execute(&config)
}
