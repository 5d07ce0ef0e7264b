use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An input is outside its admissible range.
    #[error("invalid {field}: {reason}")]
    Validation { field: &'static str, reason: String },

    /// A structure does not fit the grid or the cavity.
    #[error("geometry: {0}")]
    Geometry(String),

    #[error("configuration: {0}")]
    Config(String),

    /// The iterative eigensolver or a root finder gave up.
    #[error("solver: {message} (achieved residual {residual:.3e})")]
    Solver { message: String, residual: f64 },

    #[error("domain: {0}")]
    Domain(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("extraction: {0}")]
    Extraction(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::Validation {
        field,
        reason: reason.into(),
    }
}
