use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A state lies outside the set on which the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// A computation left the admissible state region.
    #[error("range error: {0}")]
    Range(String),
    /// An iterative method failed to converge.
    #[error("numerical error: {message} (residual {residual:e})")]
    Numerical { message: String, residual: f64 },
    /// Invalid run configuration; names the first failing constraint.
    #[error("configuration error: {0}")]
    Config(String),
    /// A condition that the algorithm guarantees was violated.
    #[error("internal error: {0}")]
    Internal(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn numerical(message: impl Into<String>, residual: f64) -> Self {
        Error::Numerical {
            message: message.into(),
            residual,
        }
    }

    /// Prefixes the message with context, keeping the variant.
    pub fn context(self, ctx: &str) -> Self {
        match self {
            Error::Domain(m) => Error::Domain(format!("{ctx}: {m}")),
            Error::Range(m) => Error::Range(format!("{ctx}: {m}")),
            Error::Numerical { message, residual } => Error::Numerical {
                message: format!("{ctx}: {message}"),
                residual,
            },
            Error::Config(m) => Error::Config(format!("{ctx}: {m}")),
            Error::Internal(m) => Error::Internal(format!("{ctx}: {m}")),
            Error::Parse(m) => Error::Parse(format!("{ctx}: {m}")),
            e @ Error::Io(_) => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
