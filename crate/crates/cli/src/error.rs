use std::fmt;

use thiserror::Error;

/// Failure of a subcommand, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or flag combinations (exit 1).
    #[error("{0}")]
    Usage(String),
    /// Malformed or inconsistent input data (exit 2).
    #[error("{stage}: {message}")]
    Input { stage: Stage, message: String },
    /// A check inside the toolkit failed on data that had passed validation
    /// (exit 3).
    #[error("{stage}: internal error: {message}")]
    Internal { stage: Stage, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input { .. } => 2,
            CliError::Internal { .. } => 3,
        }
    }

    pub fn input(stage: Stage, message: impl fmt::Display) -> Self {
        CliError::Input {
            stage,
            message: message.to_string(),
        }
    }

    pub fn internal(stage: Stage, message: impl fmt::Display) -> Self {
        CliError::Internal {
            stage,
            message: message.to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Read,
    Write,
    Enhance,
    Decode,
    Connect,
    Ensemble,
    Evaluate,
    Validate,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Read => "read",
            Stage::Write => "write",
            Stage::Enhance => "enhance",
            Stage::Decode => "decode",
            Stage::Connect => "connect",
            Stage::Ensemble => "ensemble",
            Stage::Evaluate => "evaluate",
            Stage::Validate => "validate",
        })
    }
}
