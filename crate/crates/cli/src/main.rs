use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use cityroad_cli::commands::{run_command, Command};
use cityroad_cli::config::parse_config;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    /// Dispersion scan and linear spreading speeds.
    Speed,
    /// Full lattice run: trajectory, mass and measured speed.
    Simulate,
    /// Large-diffusion limit run.
    Asymptotic,
    /// Theory against measured speed over a parameter sweep.
    Sweep,
    /// Acceptance suite.
    Verify,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Speed => Command::Speed,
            Cmd::Simulate => Command::Simulate,
            Cmd::Asymptotic => Command::Asymptotic,
            Cmd::Sweep => Command::Sweep,
            Cmd::Verify => Command::Verify,
        }
    }
}

/// Spreading speeds and front simulations on a lattice of cities joined by roads.
#[derive(Debug, Parser)]
#[command(name = "cityroad", version)]
struct Cli {
    #[arg(value_enum)]
    command: Cmd,
    /// Configuration file of `block.key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, applied after the file. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Run sweep entries in parallel.
    #[arg(long)]
    parallel: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match parse_config(cli.config.as_deref(), &cli.set) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run_command(cli.command.into(), &cfg, cli.parallel) {
        Ok(report) => {
            for line in &report.lines {
                println!("{line}");
            }
            for f in &report.files {
                eprintln!("wrote {}", f.display());
            }
            if report.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
