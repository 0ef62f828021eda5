use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nozzle_cli::{run_shear, run_solve, run_sweep, validate, ConfigError, Outcome, RunConfig, RunOptions};

#[derive(Parser)]
#[command(name = "nozzle", version, about = "Nozzle flows with stagnation regions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate one-dimensional shear profiles.
    Shear(Common),
    /// Solve on one truncated nozzle and write the field and diagnostics.
    Solve(Common),
    /// Solve over a list of truncations and report zeta(N).
    Sweep(Common),
    /// Parse and check a configuration without running it.
    ValidateConfig(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Keep every solver sweep on one thread.
    #[arg(long)]
    serial: bool,
    #[arg(long)]
    verbose: bool,
}

const EXIT_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (Command::Shear(common) | Command::Solve(common) | Command::Sweep(common) | Command::ValidateConfig(common)) =
        &cli.command;
    let level = if common.verbose { "debug" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let cfg = match RunConfig::load(&common.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let opts = RunOptions { out: common.out.clone(), serial: common.serial };
    let result = match &cli.command {
        Command::Shear(_) => run_shear(&cfg, &opts),
        Command::Solve(_) => run_solve(&cfg, &opts),
        Command::Sweep(_) => run_sweep(&cfg, &opts),
        Command::ValidateConfig(_) => {
            validate(&cfg).map(|()| Outcome { passed: true, failures: Vec::new() }).map_err(Into::into)
        }
    };
    match result {
        Ok(outcome) if outcome.passed => {
            if matches!(cli.command, Command::ValidateConfig(_)) {
                println!("{}: ok", common.config.display());
            }
            ExitCode::SUCCESS
        }
        Ok(outcome) => {
            eprintln!("failed checks: {}", outcome.failures.join(", "));
            ExitCode::from(EXIT_FAILED)
        }
        Err(e) if e.is::<ConfigError>() => {
            eprintln!("{e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAILED)
        }
    }
}
