use std::path::PathBuf;

use thiserror::Error;

use crate::solver::SolveError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },

    /// A record violates a domain invariant. `record` names the offending item.
    #[error("invalid {record}: {msg}")]
    Invalid { record: String, msg: String },

    #[error("too few clusters: need at least {need}, found {found}")]
    TooFewClusters { need: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("vertical line: x = {x} for both endpoints")]
    VerticalLine { x: f64 },

    #[error("empty input")]
    EmptyInput,

    #[error(transparent)]
    Solve(#[from] SolveError),
}

impl Error {
    pub(crate) fn invalid(record: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Invalid {
            record: record.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the file system rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
