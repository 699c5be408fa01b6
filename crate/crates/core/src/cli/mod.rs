//! Command-line front end: config resolution, experiment runners and
//! report formats. The `snowsim` binary is a thin wrapper around
//! [`run_cli`].

mod commands;
mod config;
mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::Parser;
use thiserror::Error;

pub use commands::{run_experiment, Report};
pub use config::{Command, ExperimentConfig, Settings, TABLE_SIZES};
pub use report::{
    read_csv, write_csv, write_json_lines, ReportRow, TrialRecord, CSV_HEADER_COMMENT,
};

/// Exit statuses of the binary.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INFEASIBLE: i32 = 1;
    pub const BAD_CONFIG: i32 = 2;
    pub const INTERNAL: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub(crate) fn io(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::BAD_CONFIG,
            CliError::Internal(_) => exit::INTERNAL,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        match e {
            crate::Error::Config(_) | crate::Error::Argument(_) => CliError::Config(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "snowsim", version, about = "Simulate and analyze Snow-family consensus")]
pub struct Cli {
    /// Experiment to run (same as --command).
    #[arg(value_enum)]
    pub experiment: Option<Command>,
    /// TOML file with settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
}

impl Cli {
    /// Merges flags over the config file and resolves defaults.
    pub fn resolve(self, env_seed: Option<&str>) -> Result<ExperimentConfig, CliError> {
        let mut flags = self.settings;
        match (self.experiment, flags.command) {
            (Some(a), Some(b)) if a != b => {
                return Err(CliError::Config(format!(
                    "command given twice: {a:?} and {b:?}"
                )))
            }
            (Some(a), _) => flags.command = Some(a),
            _ => {}
        }
        let file = match &self.config {
            Some(path) => Settings::from_file(path)?,
            None => Settings::default(),
        };
        ExperimentConfig::resolve(flags.over(file), env_seed)
    }
}

/// Parses `args`, runs the experiment, writes reports, and returns the
/// process exit code.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return exit::BAD_CONFIG;
            }
            let _ = write!(stdout, "{}", e.render());
            return exit::OK;
        }
    };
    let env_seed = std::env::var("SNOWSIM_SEED").ok();
    let result = cli
        .resolve(env_seed.as_deref())
        .and_then(|cfg| run_experiment(&cfg).and_then(|r| r.emit(&cfg, stdout)));
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
