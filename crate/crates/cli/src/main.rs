use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use cmc_cli::{run, Command, Overrides, RunError};

/// Entire CMC hypersurfaces in Minkowski space from a JSON job config.
#[derive(Debug, Parser)]
#[command(name = "cmc", version, allow_negative_numbers = true)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    #[arg(long)]
    config: PathBuf,
    /// Mean curvature, replaces solver.H.
    #[arg(long = "H")]
    curvature: Option<f64>,
    /// Window half-width, replaces solver.window.
    #[arg(long)]
    window: Option<f64>,
    /// Lattice spacing, replaces solver.h.
    #[arg(long)]
    h: Option<f64>,
    /// Output directory, replaces output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let overrides = Overrides { curvature: cli.curvature, window: cli.window, h: cli.h, out: cli.out };
    match run(cli.command, &cli.config, &overrides) {
        Ok(report) => {
            for line in report.lines {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(RunError::Failed(report)) => {
            println!("{report}");
            eprintln!("{}: FAIL", cli.command.name());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("{}: {e}", cli.command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
