use thiserror::Error;

/// Errors raised by the simulation, optimization and budgeting routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("unknown level label `{0}`")]
    UnknownLevel(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("elimination singular: {0}")]
    EliminationSingular(String),

    #[error("integration failure: {0}")]
    IntegrationFailure(String),

    #[error("no period found: {0}")]
    NoPeriodFound(String),

    #[error("non-physical input: {0}")]
    NonPhysical(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
