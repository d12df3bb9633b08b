use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution parameters: {0}")]
    InvalidDistribution(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("mechanism unsupported: {0}")]
    MechanismUnsupported(String),

    #[error("no sign change on [{lo}, {hi}]")]
    Bracketing { lo: f64, hi: f64 },

    #[error("accuracy target missed: best estimate {estimate} with error {error}")]
    Accuracy { estimate: f64, error: f64 },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("bad data: {0}")]
    Data(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
