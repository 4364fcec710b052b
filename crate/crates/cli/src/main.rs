use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shockprice_cli::{cmd_converge, cmd_hedge, cmd_price, cmd_ttm, CliError, RunConfig};

/// Option pricing and hedging under liquidity shocks.
#[derive(Debug, Parser)]
#[command(name = "shockprice", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the CSV here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Comma-separated spots; `a:b:step` ranges allowed.
    #[arg(long, global = true)]
    spots: Option<String>,
    /// Comma-separated signed contract counts.
    #[arg(long, global = true, allow_hyphen_values = true)]
    contracts: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    gamma: Option<String>,
    /// Time steps of the finite-difference grid.
    #[arg(long, global = true)]
    nsteps: Option<String>,
    /// Monte Carlo paths.
    #[arg(long, global = true)]
    paths: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Prices by every method at each spot.
    Price,
    /// Adjusted and implied time-to-maturity sweeps.
    Ttm,
    /// Delta curves and hedge decomposition over spots.
    Hedge,
    /// Grid ladder and PDE-versus-Monte-Carlo checks.
    Converge,
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let overrides = [
        ("seed", &cli.seed),
        ("spots", &cli.spots),
        ("contracts", &cli.contracts),
        ("gamma", &cli.gamma),
        ("nsteps", &cli.nsteps),
        ("paths", &cli.paths),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load(cli)?;
    log::info!("running {:?}", cli.command);
    let report = match cli.command {
        Command::Price => cmd_price(&cfg)?,
        Command::Ttm => cmd_ttm(&cfg)?,
        Command::Hedge => cmd_hedge(&cfg)?,
        Command::Converge => cmd_converge(&cfg)?,
    };
    let written = match &cfg.out {
        Some(path) => std::fs::write(path, &report.csv).map_err(|e| (path.display().to_string(), e)),
        None => std::io::stdout()
            .write_all(report.csv.as_bytes())
            .map_err(|e| ("stdout".to_string(), e)),
    };
    written.map_err(|(path, e)| CliError::Output {
        path,
        reason: e.to_string(),
    })?;
    if report.failures > 0 {
        return Err(CliError::Acceptance(report.failures));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("shockprice: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
