use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use twinbeam::commands::{self, Format};
use twinbeam::config::{AnalyzeConfig, FitConfig};
use twinbeam::formats::read_json;
use twinbeam::{CliError, CliResult};
use twinbeam_core::SimulationConfig;

/// Photon-number correlation markers for twin-beam, thermal and coherent light.
#[derive(Parser)]
#[command(name = "twinbeam", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration for the subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Table format; `json` embeds tables in the report.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Overrides the seed of a simulation config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct WithInput {
    #[command(flatten)]
    common: Common,
    /// Shot CSV; overrides `input` in the config.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Difference laws, correlation coefficients and variances.
    Analytic(Common),
    /// Monte Carlo shot records as CSV plus a JSON sidecar.
    Simulate(Common),
    /// Correlation function, ε, σ²(d) and histogram of a shot file.
    Analyze(WithInput),
    /// Multithermal fit of a shot file's channels.
    Fit(WithInput),
    /// Pump-noise surface and efficiency-imbalance interval.
    NoiseBudget(Common),
    /// σ²(d) versus N and σ²(d)/N versus η tables.
    Sweep(Common),
}

fn load<T: DeserializeOwned>(path: Option<&Path>) -> CliResult<T> {
    match path {
        Some(p) => read_json(p),
        None => Err(CliError::Validation("--config is required".into())),
    }
}

fn load_or_default<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    match path {
        Some(p) => read_json(p),
        None => Ok(T::default()),
    }
}

fn table_format(c: &Common) -> Format {
    c.format.unwrap_or(Format::Tsv)
}

fn run(cli: Cli) -> CliResult<()> {
    let report = match cli.command {
        Command::Analytic(c) => {
            commands::cmd_analytic(&load(c.config.as_deref())?, &c.out, table_format(&c))?
        }
        Command::Sweep(c) => {
            commands::cmd_sweep(&load(c.config.as_deref())?, &c.out, table_format(&c))?
        }
        Command::NoiseBudget(c) => {
            commands::cmd_noise_budget(&load(c.config.as_deref())?, &c.out, table_format(&c))?
        }
        Command::Simulate(c) => {
            if matches!(c.format, Some(f) if f != Format::Csv) {
                return Err(CliError::Validation("simulate writes csv only".into()));
            }
            let mut cfg: SimulationConfig = load(c.config.as_deref())?;
            if let Some(seed) = c.seed {
                cfg.seed = seed;
            }
            let (path, series) = commands::cmd_simulate(&cfg, &c.out)?;
            println!("wrote {} shots to {}", series.len(), path.display());
            return Ok(());
        }
        Command::Analyze(w) => {
            let mut cfg: AnalyzeConfig = load_or_default(w.common.config.as_deref())?;
            if w.input.is_some() {
                cfg.input = w.input;
            }
            commands::cmd_analyze(&cfg, &w.common.out, table_format(&w.common))?
        }
        Command::Fit(w) => {
            let mut cfg: FitConfig = load_or_default(w.common.config.as_deref())?;
            if w.input.is_some() {
                cfg.input = w.input;
            }
            commands::cmd_fit(&cfg, &w.common.out, table_format(&w.common))?
        }
    };
    println!("{}", serde_json::to_string_pretty(&report["results"]).unwrap_or_default());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
