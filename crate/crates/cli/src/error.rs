//! Error classification for the command-line surface.
//!
//! Every failure maps to one of four classes with a distinct exit code, and
//! is printed to stderr as a one-line JSON object so scripts can branch on
//! structured output instead of parsing prose.

use std::fmt::Display;
use std::path::Path;

use thiserror::Error;

/// Exit codes: 0 success, 2 argument errors (from the parser), then one
/// code per failure class below.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unparsable config, unknown keys, or invalid option combinations.
    #[error("{0}")]
    Config(String),
    /// A referenced input file is missing or unreadable.
    #[error("{0}")]
    Input(String),
    /// An inner-module precondition failed while running the command.
    #[error("{0}")]
    Domain(String),
    /// Outputs could not be written.
    #[error("{0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 3,
            CliError::Input(_) => 4,
            CliError::Domain(_) => 5,
            CliError::Output(_) => 6,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Input(_) => "input",
            CliError::Domain(_) => "domain",
            CliError::Output(_) => "output",
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": {
                "code": self.exit_code(),
                "kind": self.kind(),
                "message": self.to_string(),
            }
        })
        .to_string()
    }
}

/// Wraps an inner-module error as a domain failure.
pub fn domain<E: Display>(e: E) -> CliError {
    CliError::Domain(e.to_string())
}

/// Wraps a read failure with the path that failed.
pub fn input_err<E: Display>(path: &Path, e: E) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

/// Wraps a write failure with the path that failed.
pub fn output_err<E: Display>(path: &Path, e: E) -> CliError {
    CliError::Output(format!("{}: {e}", path.display()))
}
