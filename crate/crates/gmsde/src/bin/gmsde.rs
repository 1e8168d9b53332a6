//! Thin command-line front end: loads a config, dispatches to the library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gmsde::cli;
use gmsde::config::{parse_config, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "gmsde",
    about = "Averaging experiments for multi-valued SDEs driven by G-Brownian motion",
    version
)]
struct Args {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured averaging experiment and write rates.csv,
    /// summary.json and plot.gp.
    Run,
    /// Run the property suites and print a pass/fail table.
    Check,
    /// Run the sine-series demo preset with deviation diagnostics.
    DemoExample4,
}

fn load_config(path: &Option<PathBuf>) -> Result<ExperimentConfig, String> {
    let mut config = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| format!("reading {}: {e}", p.display()))?;
            parse_config(&text).map_err(|e| e.to_string())?
        }
        None => ExperimentConfig::default(),
    };
    cli::apply_env_overrides(&mut config);
    Ok(config)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = match load_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(cli::EXIT_IO as u8);
        }
    };
    let code = match args.command {
        Command::Run => cli::cmd_run(&config),
        Command::Check => cli::cmd_check(&config),
        Command::DemoExample4 => cli::cmd_demo_example4(&config),
    };
    ExitCode::from(code as u8)
}
