use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("accuracy target missed in {context}: estimate {estimate:.3e} > target {target:.3e}")]
    Accuracy {
        context: String,
        estimate: f64,
        target: f64,
    },

    #[error("field evaluation failed at {at}: {reason}")]
    FieldEval { at: String, reason: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("time step {level} (t = {t}) did not converge: residual {residual:.3e}")]
    StepFailure { level: usize, t: f64, residual: f64 },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
