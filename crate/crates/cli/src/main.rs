// Range checks are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod error;
mod output;
mod setup;

use args::{Cli, Command};
use clap::Parser;
use commands::Report;
use error::CliError;
use output::RunOutput;
use serde_json::json;
use sha2::{Digest, Sha256};
use std::path::PathBuf;
use std::process::ExitCode;

/// SHA-256 of the serialized configuration followed by the contents of every
/// input file it references.
fn config_hash(config: &serde_json::Value, inputs: &[String]) -> String {
    let mut h = Sha256::new();
    h.update(config.to_string().as_bytes());
    for text in inputs {
        h.update(b"\n");
        h.update(text.as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let mut out = RunOutput::create(&cli.command.output().out)?;
    let mut rep = Report::default();
    match &cli.command {
        Command::Hinf(a) => commands::hinf(a, &mut out, &mut rep)?,
        Command::RiskIndex(a) => commands::risk_index(a, &mut out, &mut rep)?,
        Command::RateFunction(a) => commands::rate(a, &mut out, &mut rep)?,
        Command::Bound(a) => commands::bound(a, &mut out, &mut rep)?,
        Command::Simulate(a) => commands::simulate(a, &mut out, &mut rep)?,
        Command::Pareto(a) => commands::pareto(a, &mut out, &mut rep)?,
        Command::Experiment6(a) => commands::experiment6(a, &mut out, &mut rep)?,
    }
    for w in &rep.warnings {
        eprintln!("warning: {w}");
    }
    for line in &rep.summary {
        println!("{line}");
    }
    let config = serde_json::to_value(&cli.command)
        .map_err(|e| CliError::Numerical(format!("cannot serialize the configuration: {e}")))?;
    let files: Vec<String> = out
        .files()
        .iter()
        .filter_map(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .collect();
    let meta = json!({
        "command": cli.command.name(),
        "config_hash": config_hash(&config, &rep.inputs),
        "seed": rep.seed,
        "versions": {
            "momentum-risk": momentum_risk::VERSION,
            "momentum-risk-cli": env!("CARGO_PKG_VERSION"),
        },
        "config": config,
        "resolved": rep.resolved,
        "warnings": rep.warnings,
        "files": files,
    });
    out.json("meta.json", &meta)?;
    Ok(out.commit())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
