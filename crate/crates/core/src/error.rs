//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by the reconstruction toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Geometry input violates a structural requirement.
    #[error("invalid geometry: {0}")]
    Geometry(String),

    /// Mesh generation or mesh validation failed.
    #[error("meshing failed: {0}")]
    Meshing(String),

    /// A parameter is out of range or inconsistent with another input.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A linear system could not be factorized.
    #[error("singular system: {0}")]
    Singular(String),

    /// An iterative method did not reach its tolerance.
    #[error("no convergence: {0}")]
    NonConvergence(String),

    /// A map lost orientation or injectivity.
    #[error("degenerate map: {0}")]
    DegenerateMap(String),

    /// Malformed or unreadable configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// File system failure.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Malformed data file.
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
}

impl Error {
    /// True for errors caused by numerical failure rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Singular(_) | Error::NonConvergence(_) | Error::DegenerateMap(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
