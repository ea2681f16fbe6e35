use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use iontangle::{output_root, run_evolve, run_scenario, run_steady, run_sweep, RunError, ScenarioConfig, ScenarioResult, SCENARIOS};

#[derive(Parser)]
#[command(name = "iontangle", version, about = "Dissipative two-ion Bell-state preparation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named scenario.
    Scenario {
        name: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Steady-state sweep over the configured grid axes.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Single steady-state solve.
    Steady {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time evolution from the mixed start.
    Evolve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List scenario names.
    List,
}

fn execute(cli: Cli) -> Result<(), RunError> {
    let (result, out, cfg): (ScenarioResult, Option<PathBuf>, ScenarioConfig) = match cli.command {
        Command::List => {
            for name in SCENARIOS {
                println!("{name}");
            }
            return Ok(());
        }
        Command::Scenario { name, config, out } => {
            let cfg = match config {
                Some(path) => ScenarioConfig::load(&path)?,
                None => ScenarioConfig::default(),
            };
            (run_scenario(&name, &cfg)?, out, cfg)
        }
        Command::Sweep { config, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            (run_sweep(&cfg)?, out, cfg)
        }
        Command::Steady { config, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            (run_steady(&cfg)?, out, cfg)
        }
        Command::Evolve { config, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            (run_evolve(&cfg)?, out, cfg)
        }
    };
    let dir = result.write(&output_root(out.as_deref(), &cfg))?;
    if result.metadata["unconverged"] == true {
        log::warn!("result marked unconverged; see convergence in meta.json");
    }
    println!("{}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
