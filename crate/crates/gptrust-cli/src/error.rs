//! One error type per failure class, each rendering as the one-line
//! diagnostic the binary prints before exiting.

use thiserror::Error;

/// A command failure. Usage problems exit with code 2, everything else
/// with 1; the variant name doubles as the diagnostic's class tag.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad invocation: unknown keys, missing required flags, values out of
    /// their documented ranges.
    #[error("usage error: {0}")]
    Usage(String),
    /// Input files that parse but cannot be used (missing values where
    /// values are required, dimension mismatches, empty datasets).
    #[error("data error: {0}")]
    Data(String),
    /// A model file that cannot be read or fails validation.
    #[error("model error: {0}")]
    Model(String),
    /// Hyperparameter training failed.
    #[error("fit error: {0}")]
    Fit(String),
    /// Numerical breakdown after inputs were accepted (conditioning,
    /// degenerate scores).
    #[error("numerical error: {0}")]
    Numerics(String),
    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

pub(crate) fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

pub(crate) fn model_err(e: impl std::fmt::Display) -> CliError {
    CliError::Model(e.to_string())
}

pub(crate) fn fit_err(e: impl std::fmt::Display) -> CliError {
    CliError::Fit(e.to_string())
}

pub(crate) fn numerics_err(e: impl std::fmt::Display) -> CliError {
    CliError::Numerics(e.to_string())
}

/// Sorts task-analysis failures into the CLI's classes: bad caller inputs
/// are usage errors, model/data shape problems are data errors, and the
/// rest is numerical.
pub(crate) fn task_err(e: gptrust_core::tasks::TaskError) -> CliError {
    use gptrust_core::tasks::TaskError as T;
    match e {
        T::BadThreshold { .. } | T::ZeroQueries | T::BadSpan { .. } | T::BadGrid { .. } => {
            CliError::Usage(e.to_string())
        }
        T::NotOneDimensional(_) | T::EmptyModel => CliError::Data(e.to_string()),
        T::Knowledge(_) | T::Gpr(_) => CliError::Numerics(e.to_string()),
    }
}
