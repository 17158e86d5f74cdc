use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by graph construction, file I/O, and the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("self-loop at vertex {0}: diagonal entries must be zero")]
    SelfLoop(usize),

    #[error("{op} requires a {required} graph, got {actual}")]
    WeightClass {
        op: &'static str,
        required: &'static str,
        actual: &'static str,
    },

    #[error("{op} requires a real signal")]
    SignalClass { op: &'static str },

    #[error("matrix not symmetric: entry ({i},{j}) differs from ({j},{i}) by {delta:e}")]
    Asymmetry { i: usize, j: usize, delta: f64 },

    #[error("eigensolver did not converge within {0} sweeps")]
    NoConvergence(usize),

    #[error("orthogonality-preserving step hit a singular system at tau = {0:e}")]
    SingularStep(f64),

    #[error("frequencies not ascending at index {0}")]
    Unsorted(usize),

    #[error("harmonic index {index} out of range for basis of size {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl AsRef<std::path::Path>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.as_ref().display().to_string(),
            line,
            msg: msg.into(),
        }
    }
}
