use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use discor_lab::commands::{cmd_report, cmd_run, cmd_sweep, cmd_verify};
use discor_lab::config::{self, RawConfig};
use discor_lab::{LabError, LabResult};

/// Seeded DisCor experiments on tabular MDPs.
///
/// Every configuration key can be set in a `--config` file or overridden as
/// `--key value`. Exit codes: 0 success, 1 bad configuration, 2 bound violated,
/// 3 runtime failure.
#[derive(Parser)]
#[command(name = "discor-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and write its metrics CSV and manifest.
    Run(Overrides),
    /// Run every env × scheme × seed combination and write `summary.csv`.
    Sweep(Overrides),
    /// Check a bound: `--bound lemma|thm3|complexity`.
    Verify(Overrides),
    /// Summarize metrics CSVs (files or directories) against baseline schemes.
    Report(Overrides),
}

#[derive(clap::Args)]
struct Overrides {
    /// `--config <file>` and `--key value` pairs; `report` also takes CSV paths.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, num_args = 0..)]
    args: Vec<String>,
}

/// Split positional paths from `--key value` pairs.
fn split_paths(args: &[String]) -> (Vec<PathBuf>, Vec<String>) {
    let (mut paths, mut rest) = (Vec::new(), Vec::new());
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a.starts_with("--") {
            rest.push(a.clone());
            if !a.contains('=') {
                rest.extend(it.next().cloned());
            }
        } else {
            paths.push(PathBuf::from(a));
        }
    }
    (paths, rest)
}

fn dispatch(command: Command) -> LabResult<String> {
    match command {
        Command::Run(o) => cmd_run(&config::load(&o.args)?),
        Command::Verify(o) => cmd_verify(&config::load(&o.args)?),
        Command::Sweep(o) => {
            let outcome = cmd_sweep(&config::load(&o.args)?)?;
            if outcome.failures.is_empty() {
                Ok(outcome.report)
            } else {
                Err(LabError::Runtime(format!("{}{}", outcome.report, outcome.failures.join("\n"))))
            }
        }
        Command::Report(o) => {
            let (paths, rest) = split_paths(&o.args);
            if paths.is_empty() {
                return Err(LabError::config(0, "paths", "report needs at least one CSV file or directory"));
            }
            let (file, overrides) = config::take_config_path(&rest)?;
            let mut raw = match file {
                Some(p) => RawConfig::parse(&std::fs::read_to_string(&p).map_err(|e| LabError::config(0, "config", format!("{}: {e}", p.display())))?)?,
                None => RawConfig::default(),
            };
            raw.apply_overrides(&overrides)?;
            let cfg = config::ExperimentConfig::from_raw(&raw)?;
            cmd_report(&paths, &cfg.baselines)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("discor-lab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
