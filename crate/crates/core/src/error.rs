use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("numerical failure in case {case_id}: {reason}")]
    Divergence { case_id: u64, reason: String },

    #[error("SMO did not converge after {iterations} iterations (violation gap {gap:.3e} > tol {tol:.1e})")]
    NonConvergence { iterations: usize, gap: f64, tol: f64 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse classification used by the command-line front end to pick an
/// exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
    NonConvergence,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::InvalidGeometry(_) => ErrorKind::Config,
            Error::InvalidInput(_) | Error::Data(_) | Error::Io { .. } => ErrorKind::Data,
            Error::Singular(_) | Error::Divergence { .. } => ErrorKind::Numeric,
            Error::NonConvergence { .. } => ErrorKind::NonConvergence,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}
