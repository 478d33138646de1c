//! Command-line front end for the age-structured population simulator.
//!
//! Exit codes: 0 success, 2 configuration error, 3 assumption violation,
//! 4 numerical or range failure.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use config::ScenarioConfig;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn config(message: String) -> Self {
        CliError { code: 2, message }
    }

    fn runtime(message: String) -> Self {
        CliError { code: 4, message }
    }
}

impl From<agepop::Error> for CliError {
    fn from(err: agepop::Error) -> Self {
        let code = match err {
            agepop::Error::Config { .. } | agepop::Error::IndexOutOfRange { .. } => 2,
            _ => 4,
        };
        CliError {
            code,
            message: err.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "agepop",
    version,
    about = "Simulate age-structured logistic population dynamics via the exact moment reduction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the standing assumptions on fertility and mortality.
    Validate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the scenario's output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify the regime by the base reproduction rate and report the
    /// equilibrium.
    Equilibrium {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the moment system and write the time series plus monitor
    /// report.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Integration horizon (overrides the scenario's sim.t_end).
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild the age density at the given times and check moment
    /// consistency.
    Reconstruct {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated reconstruction times, e.g. `--times 1,2,5`.
        #[arg(long)]
        times: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rerun classification and simulation across a list of parameter
    /// values.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Parameter path: fertility.scale, mortality.base,
        /// mortality.scale, or kernel.rho.
        #[arg(long, default_value = "fertility.scale")]
        param: String,
        /// Comma-separated parameter values.
        #[arg(long)]
        values: String,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the nonlinear and frozen-coefficient systems and check the
    /// domination bound.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-check the moment reduction against a direct transport-equation
    /// solve.
    OraclePde {
        #[arg(long)]
        config: PathBuf,
        /// Time step (also the age step; unit CFL).
        #[arg(long)]
        dt: f64,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let result = run(cli);
    if log_enabled() {
        eprintln!(
            "[agepop] finished in {:.3}s",
            started.elapsed().as_secs_f64()
        );
    }
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn log_enabled() -> bool {
    std::env::var("AGEPOP_LOG").is_ok_and(|v| !v.is_empty() && v != "0")
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Validate { config, out } => {
            let scenario = ScenarioConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| scenario.output.dir.clone());
            Ok(commands::cmd_validate(&scenario, &dir)? as u8)
        }
        Command::Equilibrium { config, out } => {
            let scenario = ScenarioConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| scenario.output.dir.clone());
            Ok(commands::cmd_equilibrium(&scenario, &dir)? as u8)
        }
        Command::Simulate { config, t_end, out } => {
            let scenario = ScenarioConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| scenario.output.dir.clone());
            Ok(commands::cmd_simulate(&scenario, t_end, &dir)? as u8)
        }
        Command::Reconstruct { config, times, out } => {
            let scenario = ScenarioConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| scenario.output.dir.clone());
            Ok(commands::cmd_reconstruct(&scenario, &times, &dir)? as u8)
        }
        Command::Sweep {
            config,
            param,
            values,
            t_end,
            out,
        } => {
            let scenario = ScenarioConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| scenario.output.dir.clone());
            Ok(commands::cmd_sweep(&scenario, &param, &values, t_end, &dir)? as u8)
        }
        Command::Compare { config, t_end, out } => {
            let scenario = ScenarioConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| scenario.output.dir.clone());
            Ok(commands::cmd_compare(&scenario, t_end, &dir)? as u8)
        }
        Command::OraclePde {
            config,
            dt,
            t_end,
            out,
        } => {
            let scenario = ScenarioConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| scenario.output.dir.clone());
            Ok(commands::cmd_oracle_pde(&scenario, dt, t_end, &dir)? as u8)
        }
    }
}
