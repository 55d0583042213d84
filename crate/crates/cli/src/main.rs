use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use posbuild::config::{Mode, ScenarioConfig};
use posbuild::{run_scenario, run_sweep, CliError};

#[derive(Parser)]
#[command(
    name = "posbuild",
    version,
    about = "Best responses and equilibria for competitive position-building"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory; overrides `output` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print nothing on success.
    #[arg(long, global = true)]
    quiet: bool,
    /// Reserved. There is no randomness to seed; passing it is an error.
    #[arg(long, global = true, hide = true)]
    seedless: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Solve { config: PathBuf },
    /// Run one scenario per combination of the config's parameter grid.
    Sweep { config: PathBuf },
}

fn output_dir(cli_out: &Option<PathBuf>, config: &ScenarioConfig) -> PathBuf {
    match (cli_out, &config.output) {
        (Some(dir), _) => dir.clone(),
        (None, Some(dir)) => config.base_dir.join(dir),
        (None, None) => config.base_dir.join("output"),
    }
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    if cli.seedless {
        return Err(CliError::Config {
            key: "--seedless".into(),
            message: "flag is reserved: runs are deterministic and use no random numbers".into(),
        });
    }
    match &cli.command {
        Command::Solve { config } => {
            let config = ScenarioConfig::load(config)?;
            if config.mode == Mode::Sweep {
                return Err(CliError::Config {
                    key: "mode".into(),
                    message: "sweep configs run with the `sweep` subcommand".into(),
                });
            }
            let out = output_dir(&cli.out, &config);
            let outcome = run_scenario(&config, &out)?;
            if !cli.quiet {
                println!(
                    "{}: {} after {} iteration(s), costs ({}, {}) -> {}",
                    if outcome.exit_code == 0 {
                        "ok"
                    } else {
                        "failed"
                    },
                    outcome.status,
                    outcome.iterations,
                    posbuild::format::fmt_num(outcome.cost_a_final),
                    posbuild::format::fmt_num(outcome.cost_b_final),
                    out.display()
                );
            }
            Ok(outcome.exit_code)
        }
        Command::Sweep { config } => {
            let config = ScenarioConfig::load(config)?;
            let out = output_dir(&cli.out, &config);
            let code = run_sweep(&config, &out)?;
            if !cli.quiet {
                println!(
                    "sweep {} -> {}",
                    if code == 0 { "ok" } else { "had failures" },
                    out.display()
                );
            }
            Ok(code)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
