//! File-based pipeline: state → schedule → simulated table → bound report.
//!
//! Every command is a plain function returning its artifacts and console
//! text so that scripts and tests can drive the pipeline without a process.

mod artifacts;
mod commands;

use std::path::PathBuf;

pub use artifacts::{load_state, sha256_hex, Provenance, StateArtifact, StateSpec};
pub use commands::{
    cmd_bound, cmd_pipeline, cmd_schedule, cmd_simulate, cmd_state, table_csv, BoundOutput,
    PipelineConfig, PipelineOutput, ScheduleOutput, SimulateOutput,
};

pub const TOOL: &str = "qew";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] qew::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 2 for bad input, 3 for internal invariant failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_internal() => 3,
            CliError::Csv(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub(crate) fn write_file(path: &std::path::Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    }
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}
