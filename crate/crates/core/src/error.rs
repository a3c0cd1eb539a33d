use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("field evaluation diverged at (x, y, z, t) = {point:?}")]
    Diverged { point: [f64; 4] },

    #[error("parameter not in graph")]
    ParameterNotInGraph,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("corrupted checkpoint: {0}")]
    CorruptedCheckpoint(String),

    #[error("corrupted dataset: {0}")]
    CorruptedDataset(String),

    #[error("unsupported format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("unsupported dimension {0} (at most 4)")]
    UnsupportedDimension(usize),

    #[error("pathological domain: acceptance rate {rate:.3e} after {proposals} proposals")]
    PathologicalDomain { rate: f64, proposals: u64 },

    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),

    #[error("empty mask: voxel grid does not intersect the domain")]
    EmptyMask,

    #[error("meshing error: {0}")]
    Meshing(String),

    #[error("linear solver failure: {0}")]
    SolverFailure(String),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Failure class used for process exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_)
            | Error::InvalidArgument(_)
            | Error::InvalidArchitecture(_)
            | Error::UnsupportedDimension(_)
            | Error::UnsupportedDomain(_)
            | Error::EmptyMask
            | Error::Json(_) => ErrorKind::Config,
            Error::Io { .. } | Error::CorruptedCheckpoint(_) | Error::CorruptedDataset(_) | Error::UnsupportedVersion { .. } => {
                ErrorKind::Input
            }
            Error::Diverged { .. }
            | Error::NonFinite(_)
            | Error::SolverFailure(_)
            | Error::PathologicalDomain { .. }
            | Error::Meshing(_)
            | Error::Undefined(_) => ErrorKind::Numerical,
            Error::ParameterNotInGraph => ErrorKind::Internal,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Internal,
    Config,
    Input,
    Numerical,
}

impl ErrorKind {
    /// Usage errors exit with 2.
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Internal => 1,
            ErrorKind::Config => 3,
            ErrorKind::Input => 4,
            ErrorKind::Numerical => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::Internal => "internal",
            ErrorKind::Config => "config",
            ErrorKind::Input => "input",
            ErrorKind::Numerical => "numerical",
        }
    }
}
