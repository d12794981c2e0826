//! Harness-level errors and their process exit codes.

use thiserror::Error;
use visco_core::CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error{}: {msg}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config { line: Option<usize>, msg: String },

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("assertion failed: {0}")]
    AssertFailed(String),
}

impl CliError {
    /// Exit codes: 0 success, 2 config error, 3 numerical blow-up,
    /// 4 failed `--assert` check, 1 anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Core(CoreError::BlowUp { .. }) => 3,
            CliError::AssertFailed(_) => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
