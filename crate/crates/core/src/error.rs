use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller-supplied values violate an operation's precondition.
    #[error("invalid input: {0}")]
    Input(String),

    /// Reference data (fragility database, inventory) is inconsistent.
    #[error("data error: {0}")]
    Data(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite value in tensor at cell (row {row}, col {col}), anchor {anchor}, channel {channel}")]
    NonFinite {
        row: usize,
        col: usize,
        anchor: usize,
        channel: usize,
    },

    /// A file failed to parse or validate. `location` is a JSON-pointer-like
    /// path to the offending key.
    #[error("{}: {location}: {message}", path.display())]
    Format {
        path: PathBuf,
        location: String,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
