use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid library configuration: {0}")]
    Library(String),
    #[error("match matrix entry G[{row}][{col}] requires {needed} partner packets but files only have {packets}")]
    MatchTooDense {
        row: usize,
        col: usize,
        needed: usize,
        packets: usize,
    },
    #[error("invalid demand distribution: {0}")]
    Demand(String),
    #[error("invalid caching distribution: {0}")]
    Caching(String),
    #[error("invalid cache configuration: {0}")]
    CacheConfig(String),
    #[error("too many receivers: {0} (at most {max} supported)", max = crate::packet::ReceiverSet::CAPACITY)]
    TooManyReceivers(usize),
    #[error("invalid cluster coloring: {0}")]
    InvalidColoring(String),
    #[error("instance too large for exhaustive search: {0}")]
    SizeGuard(String),
    #[error("invalid bound inputs: {0}")]
    Bound(String),
    #[error("scenario {path}: {message}")]
    Scenario { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn scenario(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Scenario {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<std::path::PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
