use std::path::PathBuf;

use thiserror::Error;

/// Problems with symbols that are not in the catalog or are used with the wrong shape.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CatalogError {
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("symbol `{symbol}` expects {expected} argument(s), found {found}")]
    Arity {
        symbol: String,
        expected: usize,
        found: usize,
    },
    #[error("symbol `{symbol}` is a {expected}, used as a {found}")]
    Kind {
        symbol: String,
        expected: &'static str,
        found: &'static str,
    },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("domain file line {line}: {msg}")]
    Domain { line: usize, msg: String },
    #[error("model: {0}")]
    Model(String),
    #[error("simulator: {0}")]
    Sim(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("experiment cell {cell}: {source}")]
    Cell {
        cell: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
