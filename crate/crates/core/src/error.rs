use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{func}: {msg}")]
    Domain { func: &'static str, msg: String },

    #[error("incomplete beta continued fraction did not converge at x={x}, a={a}, b={b}")]
    NoConvergence { x: f64, a: f64, b: f64 },

    #[error("non-finite value encountered at iteration {iteration}")]
    NonFinite { iteration: u64 },

    #[error("no finite candidate stepsize: every candidate diverged")]
    NoFiniteCandidate,

    #[error("records do not share a common oracle-call grid")]
    GridMismatch,

    #[error("{path}: {msg}")]
    Config { path: String, msg: String },

    #[error("malformed CSV: {0}")]
    Parse(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn domain(func: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain {
            func,
            msg: msg.into(),
        }
    }

    pub(crate) fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
