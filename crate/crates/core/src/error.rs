use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is invalid; `field` names the offending input.
    #[error("invalid configuration `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Two hyperplanes of a basis coincide, so the Galerkin matrix is singular.
    #[error("degenerate basis: hyperplanes {first} and {second} coincide")]
    DegenerateBasis { first: usize, second: usize },

    /// Cholesky broke down; the smallest pivot encountered is reported.
    #[error("near-degenerate basis: pivot {pivot:e} at row {row} is not positive")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("velocity field vanishes at ({0}, {1})")]
    SingularField(f64, f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("training diverged at iteration {iteration}: loss {loss:e}")]
    Diverged { iteration: usize, loss: f64 },

    #[error("all {0} training runs aborted")]
    AllRunsAborted(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }
}
