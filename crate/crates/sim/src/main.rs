use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cqi_sim::{ExperimentConfig, Kind, SimError};

#[derive(Parser)]
#[command(name = "cqi-sim", version, about = "Run covariant measurement experiments from JSON configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its output file.
    Run {
        config: PathBuf,
        /// Halve the grid spacing this many times, one table row per level.
        #[arg(long, default_value_t = 0)]
        refine: u32,
        /// Directory for the output file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the experiment kinds.
    ListExperiments,
    /// Check a config without running it.
    Validate { config: PathBuf },
}

fn threads() -> Result<(), SimError> {
    let Ok(v) = std::env::var("CQI_SIM_THREADS") else { return Ok(()) };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| SimError::Config(format!("CQI_SIM_THREADS: expected a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| SimError::Internal(e.to_string()))
}

fn dispatch(cmd: Command) -> Result<(), SimError> {
    match cmd {
        Command::Run { config, refine, out } => {
            threads()?;
            let path = cqi_sim::run_file(&config, refine, out.as_deref())?;
            println!("{}", path.display());
        }
        Command::ListExperiments => {
            for k in Kind::ALL {
                println!("{:<20} {}", k.name(), k.summary());
            }
        }
        Command::Validate { config } => {
            ExperimentConfig::load(&config)?.validate()?;
            println!("{}: ok", config.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cqi-sim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
