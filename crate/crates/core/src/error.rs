use std::path::PathBuf;

use crate::ingest::ParseError;
use crate::store::Split;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dataset contains no triples")]
    EmptyDataset,

    #[error("{kind} id {id} out of range (vocabulary holds {len})")]
    InvalidId {
        kind: &'static str,
        id: u32,
        len: usize,
    },

    #[error("walk length must be at least 1")]
    InvalidWalkLength,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid manifest {}: {message}", path.display())]
    Manifest { path: PathBuf, message: String },

    #[error("dataset has no {0} split")]
    MissingSplit(Split),

    #[error("malformed report {}: {message}", path.display())]
    MalformedReport { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
