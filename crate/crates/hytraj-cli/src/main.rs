use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hytraj_cli::commands::{cmd_certify, cmd_figures, cmd_simulate, cmd_track, CommandError};
use hytraj_cli::config::ScenarioConfig;

/// Simulation, distance evaluation and Lyapunov certificates for hybrid
/// trajectories with state-triggered jumps.
#[derive(Parser)]
#[command(name = "hytraj", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Tolerance override KEY=VAL (repeatable), e.g. tol_event=1e-9.
    #[arg(long = "tol-override", value_name = "KEY=VAL")]
    tol_override: Vec<String>,
    /// Seed for the assumption samplers.
    #[arg(long)]
    seed: Option<u64>,
    /// Jump budget before a Zeno limit is declared.
    #[arg(long)]
    max_jumps: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the reference trajectory (and the open-loop neighbour, when
    /// configured) and write per-trajectory CSVs.
    Simulate(RunArgs),
    /// Run the certificate pipeline: assumption sampling, jump/flow matrix
    /// conditions, sub-level constants and the stability verdict.
    Certify(RunArgs),
    /// Run the closed tracking loop and write the profile CSVs.
    Track(RunArgs),
    /// Regenerate the data sets behind the published figures from the
    /// bundled scenarios.
    Figures {
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn load_config(args: &RunArgs) -> Result<ScenarioConfig, CommandError> {
    let mut config = ScenarioConfig::from_path(&args.config)?;
    for pair in &args.tol_override {
        let (key, value) = pair.split_once('=').ok_or_else(|| {
            CommandError::Config(hytraj_cli::config::ConfigError::Invalid {
                key: "tol-override",
                message: format!("expected KEY=VAL, got `{pair}`"),
            })
        })?;
        config.override_tolerance(key, value)?;
    }
    if let Some(seed) = args.seed {
        config.tolerances.seed = seed;
    }
    if let Some(max_jumps) = args.max_jumps {
        config.tolerances.max_jumps = max_jumps;
    }
    Ok(config)
}

fn run() -> Result<(), CommandError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(args) => {
            let config = load_config(&args)?;
            let report = cmd_simulate(&config, &args.out)?;
            print!("{}", report.to_text());
        }
        Command::Certify(args) => {
            let config = load_config(&args)?;
            let report = cmd_certify(&config, &args.out)?;
            print!("{}", report.to_text());
        }
        Command::Track(args) => {
            let config = load_config(&args)?;
            let report = cmd_track(&config, &args.out)?;
            print!("{}", report.to_text());
        }
        Command::Figures { out } => {
            for file in cmd_figures(&out)? {
                println!("wrote {file}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
