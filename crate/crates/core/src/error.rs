use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the model.
    #[error("{name} = {value} is outside the valid domain: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// The quantity is undefined at this point, e.g. mu1 at zero conversion.
    #[error("singular point: {0}")]
    Singular(String),

    /// A configuration struct violates one of its invariants.
    #[error("invalid {what}: {reason}")]
    InvalidParams { what: &'static str, reason: String },

    #[error("event stream is not sorted at index {index}")]
    Unsorted { index: usize },

    #[error("estimate undefined: {0}")]
    UndefinedEstimate(String),

    #[error("no signal: {0}")]
    NoSignal(String),

    #[error("parameters not identifiable: {0}")]
    Identifiability(String),

    #[error(
        "fit did not converge after {iterations} iterations (best residual norm {residual_norm:e})"
    )]
    NotConverged {
        iterations: usize,
        residual_norm: f64,
        best: Vec<f64>,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("i/o: {0}")]
    Io(String),

    #[error("parse error at record {record}: {reason}")]
    Parse { record: usize, reason: String },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let record = e.position().map(|p| p.record() as usize).unwrap_or(0);
        Error::Parse {
            record,
            reason: e.to_string(),
        }
    }
}
