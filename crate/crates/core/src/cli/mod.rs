//! Command orchestration behind the `rigidplast` binary.
//!
//! Every command writes `metrics.csv`, `summary.json` and one or more
//! `fields_*.vtk` into the output directory. Files are produced only after
//! all computation finished; on failure `error.json` is written instead and
//! the process exits with 2 (configuration), 3 (solver) or 4 (I/O).

mod config;
mod run;

use std::io;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use thiserror::Error;

pub use config::{parse_config, Command, ConfigError, RunConfig, KEYS};
pub use run::{execute, Artifacts};

/// Environment variable that overrides `--out`.
pub const OUT_ENV: &str = "RIGIDPLAST_OUT";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{module}: {message}")]
    Input {
        module: &'static str,
        message: String,
    },
    #[error("{module} failed: {message}")]
    Solver {
        module: &'static str,
        message: String,
        epsilon: Option<f64>,
        step: Option<usize>,
    },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Input { .. } => 2,
            Self::Solver { .. } => 3,
            Self::Io { .. } => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) | Self::Input { .. } => "config",
            Self::Solver { .. } => "solver",
            Self::Io { .. } => "io",
        }
    }

    pub fn record(&self, command: Option<Command>) -> Value {
        let (module, epsilon, step) = match self {
            Self::Config(_) => ("cli_io", None, None),
            Self::Input { module, .. } => (*module, None, None),
            Self::Solver {
                module,
                epsilon,
                step,
                ..
            } => (*module, *epsilon, *step),
            Self::Io { .. } => ("cli_io", None, None),
        };
        json!({
            "schema_version": SCHEMA_VERSION,
            "status": "error",
            "command": command.map(|c| c.name()),
            "kind": self.kind(),
            "module": module,
            "message": self.to_string(),
            "epsilon": epsilon,
            "step": step,
            "exit_code": self.exit_code(),
        })
    }
}

pub(crate) fn io_error(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Precedence: environment variable, then `--out`, then `output_dir`.
pub fn resolve_out_dir(config: &RunConfig, flag: Option<PathBuf>, env: Option<String>) -> PathBuf {
    env.filter(|s| !s.is_empty())
        .map(PathBuf::from)
        .or(flag)
        .unwrap_or_else(|| config.output_dir.clone())
}

/// Loads the configuration, runs `command` and writes artifacts or an error
/// record. Returns the process exit code.
pub fn run_cli(
    command: Command,
    config_path: &Path,
    threads: Option<usize>,
    out: Option<PathBuf>,
) -> i32 {
    let env = std::env::var(OUT_ENV).ok();
    let fallback = resolve_out_dir(&RunConfig::default(), out.clone(), env.clone());
    let (result, out_dir) = match load(command, config_path, threads) {
        Ok(config) => {
            let dir = resolve_out_dir(&config, out, env);
            (execute(command, &config).and_then(|a| a.write(&dir)), dir)
        }
        Err(e) => (Err(e), fallback),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("rigidplast {command}: {e}");
            let text = serde_json::to_string_pretty(&e.record(Some(command)))
                .expect("error record serializes");
            if std::fs::create_dir_all(&out_dir)
                .and_then(|_| std::fs::write(out_dir.join("error.json"), text + "\n"))
                .is_err()
            {
                eprintln!(
                    "rigidplast: could not write {}",
                    out_dir.join("error.json").display()
                );
            }
            e.exit_code()
        }
    }
}

fn load(command: Command, path: &Path, threads: Option<usize>) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_error(path))?;
    let mut config = parse_config(&text)?;
    if let Some(c) = config.command {
        if c != command {
            return Err(ConfigError::Invalid {
                field: "command",
                message: format!("config says {c} but {command} was requested"),
            }
            .into());
        }
    }
    if let Some(t) = threads {
        if t == 0 {
            return Err(ConfigError::Invalid {
                field: "threads",
                message: "must be at least 1".into(),
            }
            .into());
        }
        config.threads = t;
    }
    Ok(config)
}
