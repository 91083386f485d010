use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use swanmech_cli::commands::{cmd_equilibrium, cmd_oracle, cmd_regions, cmd_solve};
use swanmech_cli::config::{MechanismKind, ScenarioConfig};
use swanmech_cli::output::{emit_json, write_atomic};
use swanmech_cli::sweep::{rows_to_csv, run_sweep};
use swanmech_cli::CliError;

#[derive(Parser)]
#[command(
    name = "swanmech",
    version,
    about = "Welfare-optimal pricing for federated-learning markets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal social state under the error requirement.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Best-response dynamics from the all-abstain profile.
    Equilibrium {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = MechanismKind::Swan)]
        mechanism: MechanismKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the per-switch trace as CSV to this path.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Grid sweep described by the config's [sweep] table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Network-effect regions per type at a state (default: the optimum).
    Regions {
        #[arg(long)]
        config: PathBuf,
        /// Participation vector, comma separated.
        #[arg(long, value_delimiter = ',')]
        state: Option<Vec<u32>>,
        /// Include an error scan along each type's axis.
        #[arg(long)]
        scan: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump every participation vector with its error and welfare.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { config, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            emit_json(&cmd_solve(&cfg)?, out.as_deref())
        }
        Command::Equilibrium {
            config,
            mechanism,
            seed,
            out,
            trace,
        } => {
            let cfg = ScenarioConfig::load(&config)?;
            let (report, converged) = cmd_equilibrium(&cfg, mechanism, seed, trace.as_deref())?;
            emit_json(&report, out.as_deref())?;
            if converged {
                Ok(())
            } else {
                Err(CliError::NotConverged)
            }
        }
        Command::Sweep { config, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            let spec = cfg
                .sweep
                .clone()
                .ok_or_else(|| CliError::Config("config has no [sweep] table".into()))?;
            let rows = run_sweep(&cfg, &spec)?;
            write_atomic(&out, &rows_to_csv(&rows, cfg.types.len())?)
        }
        Command::Regions {
            config,
            state,
            scan,
            out,
        } => {
            let cfg = ScenarioConfig::load(&config)?;
            emit_json(&cmd_regions(&cfg, state, scan)?, out.as_deref())
        }
        Command::Oracle { config, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            let csv = cmd_oracle(&cfg)?;
            match out {
                Some(path) => write_atomic(&path, &csv),
                None => {
                    use std::io::Write;
                    std::io::stdout().write_all(&csv)?;
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(threads) = std::env::var("SWANMECH_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                {
                    log::warn!("could not size the thread pool: {e}");
                }
            }
            _ => log::warn!("ignoring SWANMECH_THREADS={threads:?}"),
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("swanmech: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
