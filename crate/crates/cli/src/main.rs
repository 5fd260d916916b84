use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qmci::cli::{self, DistCommand};

/// Quantum Monte Carlo integration: distribution loading, estimation,
/// amplitude-estimation sweeps and resource counts, driven by JSON configs.
#[derive(Parser)]
#[command(name = "qmci", version)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Distribution circuits: build one, compare pmfs, or train a loader.
    Dist {
        #[arg(value_enum)]
        action: Action,
        #[command(flatten)]
        io: Io,
    },
    /// Run QMCI for a quantity or an instrument.
    Estimate {
        #[command(flatten)]
        io: Io,
    },
    /// NISQ or fault-tolerant resource counts of a run.
    Resources {
        #[command(flatten)]
        io: Io,
    },
    /// Robustness sweep of an amplitude estimator.
    QaeSweep {
        #[command(flatten)]
        io: Io,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Action {
    Load,
    Metrics,
    Train,
}

#[derive(clap::Args)]
struct Io {
    /// JSON config file.
    config: PathBuf,
    /// Directory for output files.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let threads = std::env::var("QMCI_THREADS").ok();
    let run = || -> qmci::Result<Vec<PathBuf>> {
        cli::configure_threads(threads.as_deref())?;
        match &args.command {
            Command::Dist { action, io } => {
                let sub = match action {
                    Action::Load => DistCommand::Load,
                    Action::Metrics => DistCommand::Metrics,
                    Action::Train => DistCommand::Train,
                };
                cli::cmd_dist(sub, &io.config, &io.out_dir)
            }
            Command::Estimate { io } => cli::cmd_estimate(&io.config, &io.out_dir),
            Command::Resources { io } => cli::cmd_resources(&io.config, &io.out_dir),
            Command::QaeSweep { io } => cli::cmd_qae_sweep(&io.config, &io.out_dir),
        }
    };
    match run() {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("qmci: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
