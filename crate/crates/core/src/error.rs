use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate statistic: {0}")]
    DegenerateStatistic(String),

    #[error("degenerate moments: {0}")]
    DegenerateMoments(String),

    #[error("unsupported statistic: {0}")]
    UnsupportedStatistic(String),

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("fitted cost coefficient {name} = {value:e} is not positive")]
    NonpositiveCoefficient { name: &'static str, value: f64 },

    #[error("index {index} out of range for {len} records")]
    OutOfRange { index: usize, len: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("bad record index {path}: {message}")]
    IndexFormat { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("experiment cell {cell} failed: {source}")]
    Cell {
        cell: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// The innermost error, looking through experiment-cell wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Cell { source, .. } => source.root(),
            other => other,
        }
    }
}
