use thiserror::Error;

/// Errors raised by the environments, solvers and controllers.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or unsupported configuration, detected before any stepping.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed input to an operation (length mismatch, non-finite action, ...).
    #[error("input error: {0}")]
    Input(String),

    /// Operation not allowed in the current episode state.
    #[error("state error: {0}")]
    State(String),

    /// An iterative scheme hit its iteration cap before reaching tolerance.
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    /// Non-finite values appeared while integrating.
    #[error("solver blow-up at step {step}: {what}")]
    BlowUp { step: usize, what: String },

    /// The external pipe controller misbehaved.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
