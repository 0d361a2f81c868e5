//! Stage-tagged errors and their exit codes.

use std::fmt;

use triage_core::Error;

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_ROWS: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub stage: String,
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(stage: &str, message: impl Into<String>) -> Self {
        CliError { stage: stage.into(), code: EXIT_INPUT, message: message.into() }
    }

    pub fn numerical(stage: &str, message: impl Into<String>) -> Self {
        CliError { stage: stage.into(), code: EXIT_NUMERICAL, message: message.into() }
    }

    /// Classifies a library error: bad or missing input maps to 2, failures
    /// of the numerical stages to 4.
    pub fn from_core(stage: &str, e: Error) -> Self {
        let code = match e {
            Error::InvalidInput(_) | Error::MissingInput(_) | Error::Config(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => {
                EXIT_INPUT
            }
            Error::UnsupportedPopulation => EXIT_ROWS,
            Error::InsufficientData(_)
            | Error::UnimputableColumn(_)
            | Error::DegenerateClass(_)
            | Error::UndefinedMetric(_)
            | Error::Training(_)
            | Error::WrongObjective { .. }
            | Error::Numerical(_) => EXIT_NUMERICAL,
        };
        CliError { stage: stage.into(), code, message: e.to_string() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error [{}]: {}", self.stage, self.message)
    }
}

impl std::error::Error for CliError {}

/// Attaches a stage name to library results.
pub trait StageExt<T> {
    fn stage(self, stage: &str) -> Result<T, CliError>;
}

impl<T> StageExt<T> for triage_core::Result<T> {
    fn stage(self, stage: &str) -> Result<T, CliError> {
        self.map_err(|e| CliError::from_core(stage, e))
    }
}
