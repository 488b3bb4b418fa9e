use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use quench_cli::commands::{self, with_output_dir, CliError};
use quench_cli::Config;

/// Finite-difference experiments on boundary quenching.
#[derive(Parser)]
#[command(name = "quench", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides [output] output_dir.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the initial condition; prints the report as JSON.
    ValidateIc(Common),
    /// Simulate until quench and write trajectory, summary and log-log data.
    Run(Common),
    /// Estimate the temporal order of the scheme from three fixed-step runs.
    Convergence(Common),
}

fn print_json<S: serde::Serialize>(value: &S) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let (Command::ValidateIc(common) | Command::Run(common) | Command::Convergence(common)) =
        &cli.command;
    let cfg = with_output_dir(Config::load(&common.config)?, common.output_dir.as_deref());
    match cli.command {
        Command::ValidateIc(_) => {
            let report = commands::validate_ic(&cfg);
            print_json(&report)?;
            commands::validate_ic_status(&report)
        }
        Command::Run(_) => print_json(&commands::run(&cfg)?),
        Command::Convergence(_) => print_json(&commands::convergence(&cfg)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage problems count as config errors
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
