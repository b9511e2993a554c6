use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use rigidplast::cli::{run_cli, Command};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Run,
    Sweep,
    Example41,
    Safeload,
    Report,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Run => Command::Run,
            Cmd::Sweep => Command::Sweep,
            Cmd::Example41 => Command::Example41,
            Cmd::Safeload => Command::Safeload,
            Cmd::Report => Command::Report,
        }
    }
}

/// Quasi-static perfect plasticity and its rigid-plastic limit.
///
/// Writes metrics.csv, summary.json and fields_*.vtk to the output
/// directory (RIGIDPLAST_OUT overrides --out, which overrides output_dir).
#[derive(Debug, Parser)]
#[command(name = "rigidplast", version)]
struct Args {
    command: Cmd,
    /// key = value configuration file
    #[arg(long)]
    config: PathBuf,
    /// worker threads for sweeps (default: the config value, else 1)
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let args = Args::parse();
    std::process::exit(run_cli(
        args.command.into(),
        &args.config,
        args.threads,
        args.out,
    ));
}
